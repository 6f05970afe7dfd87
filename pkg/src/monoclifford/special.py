"""MacDonald functions K_p (modified Bessel, second kind) for real order and t > 0."""

from __future__ import annotations

import math

import numpy as np

# Trapezoid step for the cosh integral; the integrand is entire in s, so the
# rule converges geometrically and h=0.05 is far below 1e-13 relative error.
_TRAP_STEP = 0.05
_EXP_CUTOFF = 745.0


def gamma_fn(x: float) -> float:
    if x <= 0:
        raise ValueError(f"gamma_fn requires x > 0, got {x}")
    return math.gamma(x)


def _check_args(p, t):
    p = float(p)
    if not np.isfinite(p) or p < 0:
        raise ValueError(f"order must be finite and >= 0, got {p}")
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("bessel_k requires t > 0")
    return p, t


def is_half_integer(p: float) -> bool:
    return abs(2 * p - round(2 * p)) < 1e-14 and round(2 * p) % 2 == 1


def bessel_k_half_integer(p: float, t):
    """Closed form ``K_{m+1/2}(t) = sqrt(pi/2t) e^-t sum_k (m+k)!/(k!(m-k)!) (2t)^-k``."""
    p, t = _check_args(p, t)
    if not is_half_integer(p):
        raise ValueError(f"order {p} is not a half-integer")
    m = int(round(p - 0.5))
    series = np.zeros_like(t)
    for k in range(m + 1):
        coef = math.factorial(m + k) / (math.factorial(k) * math.factorial(m - k))
        series = series + coef * (2.0 * t) ** (-k)
    return _finish(np.sqrt(np.pi / (2.0 * t)) * np.exp(-t) * series)


def bessel_k_integral(p: float, t):
    """General-order path: trapezoid rule on ``int_0^inf exp(-t cosh s) cosh(p s) ds``.

    Evaluated in scaled form ``exp(t - t cosh s)`` so large arguments neither
    underflow nor lose relative accuracy.
    """
    p, t = _check_args(p, t)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    # beyond s_max the scaled integrand is below e^-745 relative to its peak
    s_max = np.arccosh(1.0 + (_EXP_CUTOFF + p * 40.0) / t.min())
    s_max = max(s_max, 1.0)
    s = np.arange(0.0, s_max + _TRAP_STEP, _TRAP_STEP)
    w = np.full(s.shape, _TRAP_STEP)
    w[0] *= 0.5
    out = np.empty_like(t)
    chunk = max(1, 2_000_000 // s.size)
    for start in range(0, t.size, chunk):
        tt = t[start : start + chunk, None]
        # log of exp(t - t cosh s) * cosh(p s); cosh(ps) = e^{ps}(1+e^{-2ps})/2
        log_f = -tt * (np.cosh(s) - 1.0) + p * s + np.log1p(np.exp(-2.0 * p * s)) - math.log(2.0)
        peak = log_f.max(axis=1, keepdims=True)
        total = np.sum(w * np.exp(log_f - peak), axis=1)
        with np.errstate(over="ignore"):  # reported by _finish
            out[start : start + chunk] = np.exp(peak[:, 0] - tt[:, 0]) * total
    out = _finish(out)
    return out[0] if scalar else out


def _finish(values):
    values = np.asarray(values, dtype=float)
    if np.any(np.isinf(values)):
        raise OverflowError("K_p(t) overflows double precision for this (p, t)")
    return values[()] if values.ndim == 0 else values


def bessel_k(p: float, t):
    """``K_p(t)`` for real order ``p >= 0`` and ``t > 0`` (scalar or array)."""
    p, _ = _check_args(p, t)
    if is_half_integer(p):
        return bessel_k_half_integer(p, t)
    return bessel_k_integral(p, t)


def bessel_k_recursion_residual(p: float, t: float, step: float | None = None) -> float:
    """Relative residual of ``d/dt[t^-p K_p(t)] = -t^-p K_{p+1}(t)``.

    The derivative is a central difference; ``step`` defaults to ``1e-4 * t``.
    """
    p, t = _check_args(p, t)
    t = float(t)
    if step is None:
        step = 1e-4 * t
    if step >= t:
        raise ValueError("difference step must be smaller than t")
    f = lambda s: s ** (-p) * bessel_k(p, s)
    deriv = (f(t + step) - f(t - step)) / (2.0 * step)
    rhs = t ** (-p) * bessel_k(p + 1.0, t)
    return abs(deriv + rhs) / abs(rhs)
