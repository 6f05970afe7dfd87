"""Fundamental solutions of the (disturbed) Dirac operator.

Vectorized helpers take point arrays of shape ``(..., n)`` and return numpy
arrays; the ``Multivector``-valued functions are single-point conveniences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .algebra import Multivector, Paravector, vector_blade
from .special import bessel_k, gamma_fn

SINGULAR_RADIUS = 1e-12


def sigma_n(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)


@dataclass(frozen=True)
class KernelParams:
    n: int
    a: Paravector

    def __post_init__(self):
        if self.n not in (2, 3, 4):
            raise ValueError(f"spatial dimension must be 2, 3 or 4, got {self.n}")
        if self.a.dim != self.n:
            raise ValueError("paravector dimension does not match n")
        if self.a.a0 < 0:
            raise ValueError("a0 must be nonnegative")

    @classmethod
    def laplace(cls, n: int) -> "KernelParams":
        return cls(n, Paravector.zero(n))

    @property
    def a0(self) -> float:
        return self.a.a0

    @property
    def avec(self) -> np.ndarray:
        return self.a.vec


def _radius(x):
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r < SINGULAR_RADIUS):
        raise ValueError("kernel evaluated at the singular point x = 0")
    return x, r


def _as_mv(n, scalar, vec) -> Multivector:
    c = np.zeros(1 << n, dtype=complex)
    c[0] = scalar
    for j in range(n):
        c[vector_blade(j + 1)] = vec[j]
    return Multivector(n, c)


def cauchy_components(x, n: int) -> np.ndarray:
    """Vector coefficients of ``e(x) = -x / (sigma_n |x|^n)``."""
    x, r = _radius(x)
    return -x / (sigma_n(n) * r[..., None] ** n)


def cauchy_kernel_e(x, n: int) -> Multivector:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"expected a point in R^{n}")
    return _as_mv(n, 0.0, cauchy_components(x, n))


def laplace_fundamental(r, n: int):
    """Fundamental solution of ``-Laplace``: ``1/((n-2) sigma_n r^(n-2))``, or ``-log(r)/2pi`` in 2-D."""
    r = np.asarray(r, dtype=float)
    if n == 2:
        return -np.log(r) / (2.0 * math.pi)
    return 1.0 / ((n - 2) * sigma_n(n) * r ** (n - 2))


def yukawa_radial(r, n: int, a0: float):
    """``K_{a0}(r) = (2 pi)^(-n/2) (a0/r)^(n/2-1) K_{n/2-1}(a0 r)``."""
    r = np.asarray(r, dtype=float)
    if a0 == 0:
        return laplace_fundamental(r, n)
    nu = n / 2.0 - 1.0
    return (2.0 * math.pi) ** (-n / 2.0) * (a0 / r) ** nu * bessel_k(nu, a0 * r)


def yukawa_kernel(x, params: KernelParams) -> float:
    """Fundamental solution of ``-Laplace + a0^2`` at a point."""
    _, r = _radius(x)
    if params.a0 == 0 and params.n == 2:
        raise ValueError("a0 = 0 is only supported for n >= 3")
    return float(yukawa_radial(r, params.n, params.a0))


def gradient_profile(r, n: int, a0: float):
    """``w(r) = (2 pi)^(-n/2) (a0 r)^(n/2) K_{n/2}(a0 r)``, equal to ``1/sigma_n`` when a0 = 0."""
    r = np.asarray(r, dtype=float)
    if a0 == 0:
        return np.full(r.shape, 1.0 / sigma_n(n))[()]
    t = a0 * r
    return (2.0 * math.pi) ** (-n / 2.0) * t ** (n / 2.0) * bessel_k(n / 2.0, t)


def gradient_profile_derivative(r, n: int, a0: float):
    """``dw/dr = -a0 (2 pi)^(-n/2) (a0 r)^(n/2) K_{n/2-1}(a0 r)``."""
    r = np.asarray(r, dtype=float)
    if a0 == 0:
        return np.zeros(r.shape)[()]
    t = a0 * r
    return -a0 * (2.0 * math.pi) ** (-n / 2.0) * t ** (n / 2.0) * bessel_k(n / 2.0 - 1.0, t)


def small_argument_constant(r: float, params: KernelParams) -> float:
    if params.a0 <= 0:
        raise ValueError("small_argument_constant requires a0 > 0")
    if r <= 0:
        raise ValueError("r must be positive")
    return float(gradient_profile(r, params.n, params.a0))


def phase(x, params: KernelParams) -> np.ndarray:
    return np.exp(-1j * (np.asarray(x, dtype=float) @ params.avec))


def eia_components(x, params: KernelParams) -> tuple[np.ndarray, np.ndarray]:
    """Scalar and vector coefficients of ``e_{ia}(x)``.

    ``e_{ia}(x) = -e^{-i<a,x>} { w(|x|) x/|x|^n + i a0 K_{a0}(|x|) }``; with
    a0 = 0 the Bessel factors take their small-argument limits, leaving the
    phase times the Cauchy kernel.
    """
    n = params.n
    if params.a.is_zero():
        return np.zeros(np.shape(x)[:-1], dtype=complex), cauchy_components(x, n).astype(complex)
    x, r = _radius(x)
    ph = phase(x, params)
    vec = -(ph * gradient_profile(r, n, params.a0) / r**n)[..., None] * x
    if params.a0 == 0:
        scal = np.zeros(r.shape, dtype=complex)
    else:
        scal = -1j * params.a0 * ph * yukawa_radial(r, n, params.a0)
    return scal, vec


def disturbed_kernel_eia(x, params: KernelParams) -> Multivector:
    s, v = eia_components(np.asarray(x, dtype=float), params)
    return _as_mv(params.n, s, v)


def kernel_split_difference(x, params: KernelParams) -> Multivector:
    """``e_{ia}(x) - e(x)``; its size is ``O(|x|^{1-n+tau})`` near 0."""
    return disturbed_kernel_eia(x, params) - cauchy_kernel_e(x, params.n)


def eia_derivative_components(x, params: KernelParams) -> tuple[np.ndarray, np.ndarray]:
    """``d/dx_k`` of the scalar and vector coefficients of ``e_{ia}``.

    Returns arrays of shape ``(..., n)`` (index k) and ``(..., n, n)`` (j, k).
    """
    n = params.n
    a0 = params.a0
    avec = params.avec
    x, r = _radius(x)
    ph = phase(x, params)
    w = gradient_profile(r, n, a0)
    dw = gradient_profile_derivative(r, n, a0)
    rn = r**n
    unit = x / r[..., None]
    # q(x) = w(r) / r^n, grad q = (dw/r^n - n w / r^(n+1)) * x/r
    dq = (dw / rn - n * w / (rn * r))[..., None] * unit
    q = w / rn
    eye = np.eye(n)
    # vec_j = -ph * q * x_j
    dvec = -(ph[..., None, None]) * (
        eye * q[..., None, None] + x[..., :, None] * dq[..., None, :]
    ) + 1j * avec[None, :] * (ph * q)[..., None, None] * x[..., :, None]
    if a0 == 0:
        dscal = np.zeros(x.shape, dtype=complex)
    else:
        kr = yukawa_radial(r, n, a0)
        # K_{a0}'(r) = -w(r) / r^(n-1), from the closed form of D K_{a0}
        dk = -w / r ** (n - 1)
        dscal = -1j * a0 * (
            ph[..., None] * dk[..., None] * unit - 1j * avec * (ph * kr)[..., None]
        )
    return dscal, dvec


def phase_potential(x, params: KernelParams) -> np.ndarray:
    """``psi(x) = e^{-i<a,x>} K_{a0}(|x|)``, with ``e_{ia} = (D + i avec - i a0) psi``."""
    x, r = _radius(x)
    return phase(x, params) * yukawa_radial(r, params.n, params.a0)


@lru_cache(maxsize=None)
def _gauss(m: int):
    return np.polynomial.legendre.leggauss(m)


def _box_gauss(lo, hi, m: int):
    """Tensor Gauss-Legendre nodes and weights on an axis-aligned box."""
    x, w = _gauss(m)
    axes, weights = [], []
    for a, b in zip(lo, hi):
        axes.append(0.5 * (b - a) * x + 0.5 * (b + a))
        weights.append(0.5 * (b - a) * w)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    wts = np.prod(np.stack(np.meshgrid(*weights, indexing="ij"), axis=-1), axis=-1).reshape(-1)
    return pts, wts


def _corner_box_laplace_integral(half: np.ndarray, n: int, m: int = 16) -> float:
    """Integral of the Laplace fundamental solution over ``[0, half]`` (singular corner at 0).

    Self-similarity: the box splits into its half-size corner copy plus
    2^n - 1 sub-boxes bounded away from the origin, and the corner copy's
    integral follows from the scaling law of the integrand.
    """
    mid = half / 2.0
    regular = 0.0
    for corner in range(1, 1 << n):
        lo = np.array([mid[k] if corner >> k & 1 else 0.0 for k in range(n)])
        hi = lo + mid
        pts, wts = _box_gauss(lo, hi, m)
        regular += np.sum(wts * laplace_fundamental(np.linalg.norm(pts, axis=1), n))
    volume = float(np.prod(half))
    if n == 2:
        # I(B/2) = I(B)/4 + |B| log 2 / (8 pi)
        return 4.0 / 3.0 * (regular + volume * math.log(2.0) / (8.0 * math.pi))
    return 4.0 / 3.0 * regular


def cell_average_potential(h, params: KernelParams, m: int = 8) -> complex:
    """Mean of ``psi`` over the cell of widths ``h`` centred at the origin.

    The Laplace part is integrated with the corner self-similarity rule; the
    bounded (or log-singular) remainder uses Gauss points, which avoid 0.
    """
    n = params.n
    h = np.asarray(h, dtype=float)
    half = h / 2.0
    lap = (1 << n) * _corner_box_laplace_integral(half, n)
    pts, wts = _box_gauss(-half, half, 2 * m)
    r = np.linalg.norm(pts, axis=1)
    rest = phase_potential(pts, params) - laplace_fundamental(r, n)
    total = lap + np.sum(wts * rest)
    return complex(total / np.prod(h))


def cell_average_eia(h, params: KernelParams, m: int = 8) -> tuple[complex, np.ndarray]:
    """Mean of ``e_{ia}`` over the cell of widths ``h`` centred at the origin.

    The Cauchy part is odd and averages to zero over the symmetric cell, so
    only the weaker split difference is integrated.
    """
    n = params.n
    h = np.asarray(h, dtype=float)
    pts, wts = _box_gauss(-h / 2.0, h / 2.0, 2 * m)
    s, v = eia_components(pts, params)
    v = v - cauchy_components(pts, n)
    vol = np.prod(h)
    return complex(np.sum(wts * s) / vol), np.sum(wts[:, None] * v, axis=0) / vol
