"""Magnetization equation ``F(M) + B M = H_a`` on a 3-D body.

With ``a = 0`` and ``n = 3`` the operator ``B = D P T`` maps a magnetization
``M`` to ``grad phi``, where ``phi(x) = (1/4 pi) int <x - y, M(y)> / |x - y|^3 dy``
is the magnetic scalar potential.  The induced (demagnetizing) field is
``H_i = -B M``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algebra import vector_blade
from .grid import Field, GridDomain, l2_inner, l2_norm, make_domain, read_field_csv
from .kernels import KernelParams
from .nemyckii import (
    PointwiseLaw,
    PropertyReport,
    check_lipschitz,
    check_monotone,
    vector_law,
)
from .operators import OperatorContext, apply_B, derivative_stencils
from .solver import SolveConfig, SolveResult, solve_monotone

VECTOR_BLADES = tuple(vector_blade(j) for j in (1, 2, 3))


class PropertyCheckFailed(RuntimeError):
    def __init__(self, message: str, reports: list[PropertyReport]):
        super().__init__(message)
        self.reports = reports


@dataclass(frozen=True)
class MHCurveSpec:
    """Parametric M-H characteristic ``H = f(M)``.

    ``linear``: ``f(M) = M / chi``.
    ``saturating``: ``f(M) = M / chi0 + beta M |M| / (M_s + |M|)``.
    """

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        need = {"linear": ("chi",), "saturating": ("chi0", "M_s", "beta")}
        if self.family not in need:
            raise ValueError(f"unknown curve family {self.family!r}")
        for key in need[self.family]:
            val = self.params.get(key)
            if val is None or not float(val) > 0:
                raise ValueError(f"curve parameter {key!r} must be a positive number")

    @property
    def modulus(self) -> float:
        """Claimed lower bound on the monotonicity modulus."""
        p = self.params
        return 1.0 / float(p["chi"] if self.family == "linear" else p["chi0"])

    @property
    def lipschitz(self) -> float:
        """Claimed Lipschitz bound."""
        if self.family == "linear":
            return self.modulus
        return self.modulus + 2.0 * float(self.params["beta"])


def mh_law(spec: MHCurveSpec) -> PointwiseLaw:
    """Vector-valued pointwise law for an M-H curve."""
    k = spec.modulus
    if spec.family == "linear":
        fn = lambda x, M: k * M
    else:
        beta = float(spec.params["beta"])
        Ms = float(spec.params["M_s"])

        def fn(x, M):
            r = np.linalg.norm(M, axis=1, keepdims=True)
            return k * M + beta * M * r / (Ms + r)

    zero = lambda x: np.zeros(len(x))
    return vector_law(
        fn, 3, name=f"{spec.family}-mh", monotone=True, strictly_monotone=True,
        lipschitz=spec.lipschitz, coercive=(k, zero), growth=(zero, spec.lipschitz),
        positive=True,
    )


@dataclass
class MagnetoProblem:
    domain: GridDomain
    curve: MHCurveSpec
    H_a: Field
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.domain.n != 3:
            raise ValueError("the magnetization problem is posed in three dimensions")
        _check_real_vector(self.H_a)

    @property
    def law(self) -> PointwiseLaw:
        return mh_law(self.curve)


def _check_real_vector(M: Field):
    if M.dim != 3:
        raise ValueError("expected a field on a 3-D domain")
    off = np.ones(8, dtype=bool)
    off[list(VECTOR_BLADES)] = False
    if np.any(M.values[:, off] != 0) or np.any(M.values.imag != 0):
        raise ValueError("expected a real vector field")


def demag_context(domain: GridDomain) -> OperatorContext:
    return OperatorContext(domain, KernelParams.laplace(3))


def potential_path(M: Field) -> Field:
    """``grad phi`` with ``phi`` summed from the exact dipole kernel at voxel centres.

    The self cell is skipped (the kernel is odd, so a cell of constant ``M``
    adds nothing at its own centre).  ``phi`` is formed on the domain dilated
    by one layer and differentiated with centred differences.
    """
    _check_real_vector(M)
    ctx = demag_context(M.domain)
    ext = ctx.ext1
    src = M.domain
    # integer offsets keep the self distance exactly zero
    tpos = ext.indices + src.lattice_offset(ext)
    mv = M.vector_part().real
    phi = np.zeros(ext.size)
    for start in range(0, ext.size, 512):
        d = (tpos[start : start + 512, None, :] - src.indices[None, :, :]) * src.h
        r = np.linalg.norm(d, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(r > 0, 1.0 / (4.0 * math.pi * r**3), 0.0)
        phi[start : start + 512] = np.einsum("tsk,sk,ts->t", d, mv, w)
    phi *= M.domain.voxel_volume
    st = derivative_stencils(ext, at=M.domain)
    grad = np.stack([st.matrices[j] @ phi for j in range(3)], axis=1)
    return Field.vector(M.domain, grad)


def demag_apply(M: Field, ctx: OperatorContext | None = None, both_paths: bool = False):
    """``B M``, the negative of the demagnetizing field.

    With ``both_paths`` the pair ``(B M, potential_path(M))`` is returned for
    cross-checking.
    """
    _check_real_vector(M)
    ctx = demag_context(M.domain) if ctx is None else ctx
    if not ctx.params.a.is_zero() or ctx.n != 3:
        raise ValueError("the demagnetization operator needs n = 3 and a = 0")
    BM = apply_B(M, ctx)
    BM = Field(BM.domain, BM.values.real.astype(complex))
    if both_paths:
        return BM, potential_path(M)
    return BM


def demag_factor(ctx: OperatorContext, min_depth: int = 2) -> float:
    """Mean of ``(B e_3)_3`` over voxels at least ``min_depth`` cells inside (1/3 for a ball)."""
    dom = ctx.domain
    e3 = np.zeros((dom.size, 3))
    e3[:, 2] = 1.0
    BM = demag_apply(Field.vector(dom, e3), ctx)
    sel = dom.distance_to_boundary() >= min_depth
    return float(np.mean(BM.vector_part().real[sel, 2]))


@dataclass(frozen=True)
class InequalityReport:
    hi_dot_m: float
    m_norm_sq: float
    ineq2_pass: bool
    ineq3_pass: bool
    delta: float

    def to_dict(self) -> dict:
        return {
            "hi_dot_m": self.hi_dot_m,
            "m_norm_sq": self.m_norm_sq,
            "ineq2_pass": self.ineq2_pass,
            "ineq3_pass": self.ineq3_pass,
            "delta": self.delta,
        }


def verify_inequalities(M: Field, ctx: OperatorContext | None = None, eps: float = 1e-6,
                        delta: float = 1e-6) -> InequalityReport:
    """``(H_i, M) <= eps ||M||^2`` and ``|(H_i, M)| <= (1 + delta) ||M||^2`` with ``H_i = -B M``."""
    Hi = demag_apply(M, ctx) * -1.0
    dot = l2_inner(Hi, M)
    msq = l2_norm(M) ** 2
    return InequalityReport(
        float(dot), float(msq), bool(dot <= eps * msq), bool(abs(dot) <= (1.0 + delta) * msq), delta
    )


def check_law(law: PointwiseLaw, domain: GridDomain, samples: int = 20_000, seed: int = 0,
              claimed_modulus: float | None = None) -> list[PropertyReport]:
    """Strict monotonicity and Lipschitz checks; a modulus below the claim is a failure."""
    mono = check_monotone(law, domain, samples, seed, strict=True)
    lip = check_lipschitz(law, domain, samples, seed + 1)
    if claimed_modulus is not None and mono.passed:
        if mono.estimates["modulus"] < claimed_modulus * (1.0 - 1e-9):
            mono.verdict = "counterexample"
    return [mono, lip]


def solve_magnetization(p: MagnetoProblem, ctx: OperatorContext | None = None,
                        check_samples: int = 20_000) -> SolveResult:
    """Check the M-H law, then solve ``F(M) + B M = H_a`` by damped iteration."""
    law = p.law
    reports = check_law(law, p.domain, check_samples, claimed_modulus=p.curve.modulus)
    failed = [r for r in reports if not r.passed]
    if failed:
        names = ", ".join(r.property for r in failed)
        raise PropertyCheckFailed(f"M-H law failed: {names}", reports)
    ctx = demag_context(p.domain) if ctx is None else ctx
    s = p.solver
    cfg = SolveConfig(
        step=s.get("step", "auto"), tol=float(s.get("tol", 1e-8)),
        max_iter=int(s.get("max_iter", 10_000)), seed=s.get("seed"),
        c=p.curve.modulus, L=p.curve.lipschitz,
    )
    return solve_monotone(law, ctx, p.H_a, cfg)


# -- applied fields and configuration ------------------------------------------


def dipole_field(domain: GridDomain, moment, position) -> Field:
    """Field of a point dipole ``(3 (m.r) r / |r|^5 - m / |r|^3) / 4 pi``."""
    m = np.asarray(moment, dtype=float)
    r = domain.centers - np.asarray(position, dtype=float)
    d = np.linalg.norm(r, axis=1, keepdims=True)
    if np.any(d < 1e-12):
        raise ValueError("dipole sits on a voxel centre")
    H = (3.0 * (r @ m)[:, None] * r / d**5 - m / d**3) / (4.0 * math.pi)
    return Field.vector(domain, H)


def applied_field(domain: GridDomain, spec: dict, base: Path | None = None) -> Field:
    kind = spec.get("kind")
    params = spec.get("params", {})
    if kind == "constant":
        value = np.asarray(params.get("value"), dtype=float)
        if value.shape != (3,):
            raise ValueError("constant applied field needs a 3-vector 'value'")
        return Field.vector(domain, np.tile(value, (domain.size, 1)))
    if kind == "dipole":
        return dipole_field(domain, params["moment"], params["position"])
    if kind == "file":
        path = Path(spec["path"])
        if base is not None and not path.is_absolute():
            path = base / path
        H = read_field_csv(path, domain)
        _check_real_vector(H)
        return H
    raise ValueError(f"unknown applied field kind {kind!r}")


def problem_from_config(cfg: dict, base: Path | None = None) -> MagnetoProblem:
    """Build a problem from the JSON schema ``domain``, ``curve``, ``applied_field``, ``solver``."""
    try:
        d = cfg["domain"]
        domain = make_domain(d["box"], int(d["N"]), d.get("shape", "ball"))
        c = cfg["curve"]
        curve = MHCurveSpec(c["family"], dict(c.get("params", {})))
        H_a = applied_field(domain, cfg["applied_field"], base)
    except KeyError as exc:
        raise ValueError(f"missing configuration key {exc}") from exc
    return MagnetoProblem(domain, curve, H_a, dict(cfg.get("solver", {})))


def load_problem(path) -> MagnetoProblem:
    path = Path(path)
    return problem_from_config(json.loads(path.read_text()), path.parent)
