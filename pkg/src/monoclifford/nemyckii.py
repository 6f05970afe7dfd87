"""Superposition (Nemyckii) operators and sampling checks of their pointwise laws.

The checks only falsify: a passing report means no counterexample turned up
in the samples drawn, never that the property is proven.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .algebra import batch_product, bar_signs, paravector_blades, vector_blade
from .grid import Field, GridDomain, l2_inner, l2_norm

NO_COUNTEREXAMPLE = "no-counterexample"
COUNTEREXAMPLE = "counterexample"


class LawEvaluationError(RuntimeError):
    """The pointwise law failed or returned non-finite values at some voxel."""


@dataclass(frozen=True)
class PointwiseLaw:
    """``f(x, u)`` acting on the real tuple of the coefficients listed in ``blades``.

    ``func`` is vectorized: it receives points ``(S, n)`` and arguments
    ``(S, m)`` and returns multivector coefficients ``(S, 2**dim)``.  The
    remaining fields are optional claims the checkers can test.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dim: int
    blades: tuple[int, ...]
    name: str = "law"
    growth: tuple[Callable[[np.ndarray], np.ndarray], float] | None = None
    monotone: bool = False
    strictly_monotone: bool = False
    coercive: tuple[float, Callable[[np.ndarray], np.ndarray]] | None = None
    positive: bool = False
    asymptotic_R: float | None = None
    lipschitz: float | None = None

    @property
    def m(self) -> int:
        return len(self.blades)

    def __call__(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u = np.atleast_2d(np.asarray(u, dtype=float))
        out = np.asarray(self.func(x, u), dtype=complex)
        return out.reshape(len(u), 1 << self.dim)

    def embed(self, u: np.ndarray) -> np.ndarray:
        """Multivector coefficients of the argument tuple."""
        u = np.atleast_2d(u)
        out = np.zeros((len(u), 1 << self.dim), dtype=complex)
        out[:, list(self.blades)] = u
        return out


def tuple_law(
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray], dim: int, blades, **claims
) -> PointwiseLaw:
    """Law whose value has the same blade layout as its argument, ``fn: (x, u) -> (S, m)`` real."""
    blades = tuple(blades)

    def func(x, u):
        out = np.zeros((len(u), 1 << dim), dtype=complex)
        out[:, list(blades)] = fn(x, u)
        return out

    return PointwiseLaw(func, dim, blades, **claims)


def vector_law(fn, dim: int, **claims) -> PointwiseLaw:
    return tuple_law(fn, dim, [vector_blade(j) for j in range(1, dim + 1)], **claims)


def paravector_law(fn, dim: int, **claims) -> PointwiseLaw:
    return tuple_law(fn, dim, paravector_blades(dim), **claims)


def _rownorm(u):
    return np.linalg.norm(u, axis=-1, keepdims=True)


def identity_law(dim: int, blades=None, scale: float = 1.0) -> PointwiseLaw:
    blades = paravector_blades(dim) if blades is None else tuple(blades)
    return tuple_law(
        lambda x, u: scale * u, dim, blades, name=f"{scale:g}*u",
        monotone=scale >= 0, strictly_monotone=scale > 0, lipschitz=abs(scale),
    )


def saturating_law(dim: int, blades=None) -> PointwiseLaw:
    """``u / (1 + |u|)``: monotone, bounded by 1, Lipschitz with constant 1."""
    blades = paravector_blades(dim) if blades is None else tuple(blades)
    return tuple_law(
        lambda x, u: u / (1.0 + _rownorm(u)), dim, blades, name="u/(1+|u|)",
        monotone=True, strictly_monotone=True, lipschitz=1.0,
        growth=(lambda x: np.ones(len(x)), 0.0), positive=True,
    )


def shifted_identity_law(dim: int, blades=None) -> PointwiseLaw:
    """``u + u/(1+|u|)``: strongly monotone with modulus 1 and Lipschitz constant 2."""
    blades = paravector_blades(dim) if blades is None else tuple(blades)
    return tuple_law(
        lambda x, u: u + u / (1.0 + _rownorm(u)), dim, blades, name="u+u/(1+|u|)",
        monotone=True, strictly_monotone=True, lipschitz=2.0, positive=True,
        coercive=(1.0, lambda x: np.zeros(len(x))),
        growth=(lambda x: np.ones(len(x)), 1.0),
    )


def nemyckii_apply(law: PointwiseLaw, u: Field) -> Field:
    """``(F u)(x) = f(x, u(x))`` on every voxel centre.

    The argument tuple is the real part of the coefficients ``law.blades``;
    any other content of ``u`` is rejected.
    """
    if u.dim != law.dim:
        raise ValueError("law and field dimensions differ")
    vals = u.values
    rest = np.ones(vals.shape[1], dtype=bool)
    rest[list(law.blades)] = False
    if np.any(vals[:, rest] != 0) or np.any(vals[:, list(law.blades)].imag != 0):
        raise ValueError("field is not real-valued on the law's argument blades")
    args = vals[:, list(law.blades)].real
    x = u.domain.centers
    try:
        out = law(x, args)
        bad = ~np.all(np.isfinite(out), axis=1)
    except Exception as exc:  # locate the failing voxel
        for i in range(len(x)):
            try:
                law(x[i : i + 1], args[i : i + 1])
            except Exception:
                raise LawEvaluationError(f"law {law.name!r} failed at x={x[i].tolist()}: {exc}") from exc
        raise
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise LawEvaluationError(f"law {law.name!r} returned non-finite values at x={x[i].tolist()}")
    return Field(u.domain, out)


def pairing_two_ways(law: PointwiseLaw, u: Field) -> tuple[float, float]:
    """``(Fu, u)`` as an L2 inner product and as ``Re int tilde(f(x, u(x))) u(x) dx``."""
    Fu = nemyckii_apply(law, u)
    direct = l2_inner(Fu, u)
    tilde = np.conj(Fu.values) * bar_signs(u.dim)
    prod = batch_product(u.dim, tilde, u.values)
    return direct, float(np.sum(prod[:, 0].real) * u.domain.voxel_volume)


@dataclass
class PropertyReport:
    property: str
    verdict: str
    samples: int
    law: str = ""
    counterexample: dict | None = None
    estimates: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == NO_COUNTEREXAMPLE

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _sample_points(domain: GridDomain, rng, count: int) -> np.ndarray:
    lo = domain.lo
    hi = domain.lo + domain.N * domain.h
    return lo + (hi - lo) * rng.random((count, domain.n))


def sample_arguments(rng, count: int, m: int, R0: float = 10.0, heavy_tail: bool = True) -> np.ndarray:
    """Half uniform in ``[-R0, R0]^m``, half a Cauchy-tailed cloud scaled by ``R0``.

    Without ``heavy_tail`` every sample is uniform in the cube.
    """
    if not heavy_tail:
        return rng.uniform(-R0, R0, (count, m))
    half = count // 2
    body = rng.uniform(-R0, R0, (half, m))
    tail = R0 * rng.standard_cauchy((count - half, m))
    tail = np.clip(tail, -1e6 * R0, 1e6 * R0)
    out = np.concatenate([body, tail])
    rng.shuffle(out)
    return out


def _pair(law, a, b):
    """``[a, b]`` row-wise for coefficient arrays (real scalar product)."""
    return np.sum((np.conj(a) * b).real, axis=1)


def _magnitude(fu, fv):
    return np.linalg.norm(fu, axis=1) + np.linalg.norm(fv, axis=1)


def _report(name, law, samples, worst_idx, violation, payload, estimates):
    if worst_idx is None:
        return PropertyReport(name, NO_COUNTEREXAMPLE, samples, law.name, None, estimates)
    ce = {k: np.asarray(v[worst_idx]).tolist() for k, v in payload.items()}
    ce["violation"] = float(violation[worst_idx])
    return PropertyReport(name, COUNTEREXAMPLE, samples, law.name, ce, estimates)


def _worst(violation, flagged=None):
    """Index of the largest flagged violation (default: violation > 0), or None."""
    flagged = violation > 0 if flagged is None else flagged
    if not np.any(flagged):
        return None
    return int(np.argmax(np.where(flagged, violation, -np.inf)))


def _random_fields(domain: GridDomain, law: PointwiseLaw, rng, count: int, R0: float):
    for _ in range(count):
        scale = R0 * rng.random()
        args = scale * rng.standard_normal((domain.size, law.m))
        yield Field(domain, law.embed(args))


def check_growth(law: PointwiseLaw, domain: GridDomain, samples: int = 100_000, seed: int = 0,
                 R0: float = 10.0, fields: int = 8, heavy_tail: bool = True) -> PropertyReport:
    """``|f(x,u)| <= a(x) + b|u|`` pointwise, and ``||Fu|| <= max(1,b) (||a|| + ||u||)`` on random fields."""
    if law.growth is None:
        raise ValueError("law declares no growth bound")
    a_fn, b = law.growth
    rng = np.random.default_rng(seed)
    x = _sample_points(domain, rng, samples)
    u = sample_arguments(rng, samples, law.m, R0, heavy_tail)
    fx = law(x, u)
    lhs = np.linalg.norm(fx, axis=1)
    rhs = a_fn(x) + b * np.linalg.norm(u, axis=1)
    violation = lhs - rhs - 1e-12 * np.maximum(lhs, 1.0)
    idx = _worst(violation)
    const = max(1.0, b)
    a_norm = float(np.sqrt(np.sum(a_fn(domain.centers) ** 2) * domain.voxel_volume))
    field_ratio = 0.0
    for f in _random_fields(domain, law, rng, fields, R0):
        ratio = l2_norm(nemyckii_apply(law, f)) / (const * (a_norm + l2_norm(f)))
        field_ratio = max(field_ratio, ratio)
    est = {"field_bound_ratio": field_ratio, "const": const}
    if idx is None and field_ratio > 1 + 1e-12:
        est["field_level_violation"] = True
    return _report("growth", law, samples, idx, violation, {"x": x, "u": u}, est)


def check_monotone(law: PointwiseLaw, domain: GridDomain, samples: int = 100_000, seed: int = 0,
                   R0: float = 10.0, strict: bool = False, heavy_tail: bool = True) -> PropertyReport:
    """``[f(x,u) - f(x,v), u - v] >= 0`` (``> 0`` when ``strict``) on random triples.

    Reports the empirical modulus ``min [f(u)-f(v), u-v] / |u-v|^2``.
    """
    rng = np.random.default_rng(seed)
    x = _sample_points(domain, rng, samples)
    u = sample_arguments(rng, samples, law.m, R0, heavy_tail)
    # half of the partners are local perturbations so small moduli get probed
    v = sample_arguments(rng, samples, law.m, R0, heavy_tail)
    near = rng.random(samples) < 0.5
    v[near] = u[near] + rng.standard_normal((near.sum(), law.m)) * rng.random((near.sum(), 1))
    du = law.embed(u - v)
    fu, fv = law(x, u), law(x, v)
    df = fu - fv
    pairing = _pair(law, df, du)
    dist2 = np.sum((u - v) ** 2, axis=1)
    ok = dist2 > 0
    # cancellation in f(u) - f(v) is relative to |f(u)| + |f(v)|
    scale = _magnitude(fu, fv) * np.sqrt(dist2)
    if strict:
        violation = np.where(ok, -pairing, -np.inf)
        idx = _worst(violation, ok & (pairing <= 0))
    else:
        violation = -pairing - 1e-12 * scale
        idx = _worst(violation)
    modulus = float(np.min(pairing[ok] / dist2[ok])) if ok.any() else float("nan")
    return _report("strictly_monotone" if strict else "monotone", law, samples, idx, violation,
                   {"x": x, "u": u, "v": v}, {"modulus": modulus})


def check_coercive(law: PointwiseLaw, domain: GridDomain, samples: int = 100_000, seed: int = 0,
                   R0: float = 10.0, fields: int = 8, heavy_tail: bool = True) -> PropertyReport:
    """``[f(x,u), u] >= d|u|^2 + g(x)``; field level ``(Fu,u) >= d||u||^2 + int g``."""
    if law.coercive is None:
        raise ValueError("law declares no coercivity constants")
    d, g_fn = law.coercive
    rng = np.random.default_rng(seed)
    x = _sample_points(domain, rng, samples)
    u = sample_arguments(rng, samples, law.m, R0, heavy_tail)
    pairing = _pair(law, law(x, u), law.embed(u))
    bound = d * np.sum(u**2, axis=1) + g_fn(x)
    violation = bound - pairing - 1e-12 * np.maximum(np.abs(bound), 1.0)
    idx = _worst(violation)
    g_int = float(np.sum(g_fn(domain.centers)) * domain.voxel_volume)
    slack = np.inf
    for f in _random_fields(domain, law, rng, fields, R0):
        lhs = l2_inner(nemyckii_apply(law, f), f)
        slack = min(slack, lhs - (d * l2_norm(f) ** 2 + g_int))
    est = {"field_slack": float(slack), "d": d}
    return _report("coercive", law, samples, idx, violation, {"x": x, "u": u}, est)


def check_positivity(law: PointwiseLaw, domain: GridDomain, samples: int = 100_000, seed: int = 0,
                     R0: float = 10.0, variant: str = "positive", R: float | None = None,
                     fields: int = 8, heavy_tail: bool = True) -> PropertyReport:
    """``[f(x,u), u] >= 0`` for all samples, or only for ``|u| >= R`` (variant ``"asymptotic"``).

    Field-level consequence: ``(Fu, u) >= 0``, resp. ``>= -c`` with
    ``c = |G| * max(0, -min_{|u|<R} [f(x,u), u])`` estimated from the samples.
    """
    if variant not in ("positive", "asymptotic"):
        raise ValueError("variant must be 'positive' or 'asymptotic'")
    if variant == "asymptotic":
        R = law.asymptotic_R if R is None else R
        if R is None or R <= 0:
            raise ValueError("asymptotic positivity needs a radius R > 0")
    rng = np.random.default_rng(seed)
    x = _sample_points(domain, rng, samples)
    u = sample_arguments(rng, samples, law.m, R0, heavy_tail)
    if variant == "asymptotic":
        # push a third of the samples onto the sphere |u| = R where the claim starts
        k = samples // 3
        dirs = rng.standard_normal((k, law.m))
        u[:k] = R * (1.0 + 0.1 * rng.random((k, 1))) * dirs / _rownorm(dirs)
    pairing = _pair(law, law(x, u), law.embed(u))
    unorm = np.linalg.norm(u, axis=1)
    scale = np.linalg.norm(law(x, u), axis=1) * unorm
    violation = -pairing - 1e-12 * scale
    if variant == "asymptotic":
        violation = np.where(unorm >= R, violation, -np.inf)
        inside = unorm < R
        deficit = max(0.0, float(-pairing[inside].min())) if inside.any() else 0.0
        c = domain.volume * deficit
    else:
        c = 0.0
    idx = _worst(violation)
    lowest = np.inf
    for f in _random_fields(domain, law, rng, fields, R0):
        lowest = min(lowest, l2_inner(nemyckii_apply(law, f), f))
    est = {"field_min_pairing": float(lowest), "c": c}
    if variant == "asymptotic":
        est["R"] = R
    return _report(variant if variant == "positive" else "asymptotically_positive", law, samples,
                   idx, violation, {"x": x, "u": u}, est)


def check_lipschitz(law: PointwiseLaw, domain: GridDomain, samples: int = 100_000, seed: int = 0,
                    R0: float = 10.0, heavy_tail: bool = True) -> PropertyReport:
    """``|f(x,u) - f(x,v)| <= L |u - v|`` and the empirical constant ``max ratio``."""
    if law.lipschitz is None:
        raise ValueError("law declares no Lipschitz constant")
    L = law.lipschitz
    rng = np.random.default_rng(seed)
    x = _sample_points(domain, rng, samples)
    u = sample_arguments(rng, samples, law.m, R0, heavy_tail)
    v = sample_arguments(rng, samples, law.m, R0, heavy_tail)
    near = rng.random(samples) < 0.5
    v[near] = u[near] + rng.standard_normal((near.sum(), law.m)) * rng.random((near.sum(), 1))
    fu, fv = law(x, u), law(x, v)
    num = np.linalg.norm(fu - fv, axis=1)
    den = np.linalg.norm(u - v, axis=1)
    ok = den > 0
    slack = 1e-12 * np.maximum(_magnitude(fu, fv) + L * (np.abs(u) + np.abs(v)).max(axis=1), 1.0)
    violation = np.where(ok, num - L * den - slack, -np.inf)
    ratio = float(np.max(num[ok] / den[ok])) if ok.any() else 0.0
    idx = _worst(violation)
    return _report("lipschitz", law, samples, idx, violation, {"x": x, "u": u, "v": v},
                   {"lipschitz_hat": ratio, "L": L})


def replay(law: PointwiseLaw, report: PropertyReport, domain: GridDomain | None = None) -> bool:
    """Re-evaluate a stored counterexample; True when it still violates the property."""
    ce = report.counterexample
    if ce is None:
        return False
    x = np.array([ce["x"]])
    u = np.array([ce["u"]])
    prop = report.property
    if prop in ("monotone", "strictly_monotone"):
        v = np.array([ce["v"]])
        val = _pair(law, law(x, u) - law(x, v), law.embed(u - v))[0]
        return val < 0 if prop == "monotone" else val <= 0
    if prop == "lipschitz":
        v = np.array([ce["v"]])
        return np.linalg.norm(law(x, u) - law(x, v)) > law.lipschitz * np.linalg.norm(u - v)
    if prop == "growth":
        a_fn, b = law.growth
        return np.linalg.norm(law(x, u)) > a_fn(x)[0] + b * np.linalg.norm(u)
    if prop == "coercive":
        d, g_fn = law.coercive
        return _pair(law, law(x, u), law.embed(u))[0] < d * np.sum(u**2) + g_fn(x)[0]
    if prop in ("positive", "asymptotically_positive"):
        return _pair(law, law(x, u), law.embed(u))[0] < 0
    raise ValueError(f"unknown property {prop!r}")
