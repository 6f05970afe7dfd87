"""Damped monotone iteration for ``F(u) + Bu = g`` on paravector fields."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .algebra import paravector_blades
from .grid import Field, l2_norm
from .nemyckii import PointwiseLaw, PropertyReport, nemyckii_apply
from .operators import OperatorContext, apply_B

_EPS = np.finfo(float).tiny
DIVERGENCE_WINDOW = 50
# relative size of off-subspace roundoff tolerated (and cleared) per iterate
SUBSPACE_RTOL = 1e-10

Operator = Union[OperatorContext, Callable[[Field], Field], None]


class SolverDivergence(RuntimeError):
    """Residual grew for too many consecutive iterations."""

    def __init__(self, message: str, residuals: list[float]):
        super().__init__(message)
        self.residuals = residuals


@dataclass
class SolveConfig:
    """Iteration settings.

    ``step="auto"`` picks ``t = c / (L + 1)**2`` from the monotonicity
    modulus ``c`` and Lipschitz bound ``L`` of the law; B adds 0 to the
    modulus and at most 1 to the Lipschitz bound.
    """

    step: float | str = "auto"
    tol: float = 1e-8
    max_iter: int = 10_000
    seed: int | None = None
    c: float | None = None
    L: float | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.step == "auto":
            if self.c is None or self.L is None or not self.c > 0 or self.L < self.c:
                raise ValueError("automatic step needs c > 0 and L >= c")
        elif isinstance(self.step, str) or not float(self.step) > 0:
            raise ValueError("step must be a positive number or 'auto'")

    @classmethod
    def from_reports(cls, monotone: PropertyReport, lipschitz: PropertyReport, **kw) -> "SolveConfig":
        """Take ``c`` from a monotonicity report and ``L`` from a Lipschitz report."""
        if not (monotone.passed and lipschitz.passed):
            raise ValueError("property reports contain counterexamples")
        c = monotone.estimates["modulus"]
        L = max(lipschitz.estimates["lipschitz_hat"], lipschitz.estimates.get("L") or 0.0, c)
        return cls(c=c, L=L, **kw)

    @property
    def lipschitz_A(self) -> float | None:
        return None if self.L is None else self.L + 1.0

    def step_size(self) -> float:
        if self.step == "auto":
            return self.c / self.lipschitz_A**2
        return float(self.step)


@dataclass
class SolveResult:
    solution: Field
    iterations: int
    residuals: list[float]
    converged: bool
    q: float | None
    step: float = field(default=float("nan"))

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residuals": self.residuals,
            "q": self.q,
            "step": self.step,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def contraction_factor(c: float, L_A: float, t: float) -> float:
    """``q = sqrt(1 - 2tc + t^2 L_A^2)``, the per-step contraction bound.

    Valid for ``c > 0``, ``L_A >= c`` and ``0 < t < 2c / L_A^2``; the
    minimum over t is at ``t = c / L_A^2``.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    if L_A < c:
        raise ValueError("L_A must be >= c")
    if not 0 < t < 2 * c / L_A**2:
        raise ValueError(f"step {t} outside the contraction window (0, {2 * c / L_A**2})")
    return math.sqrt(max(0.0, 1.0 - 2.0 * t * c + t * t * L_A * L_A))


def _operator(op: Operator) -> Callable[[Field], Field]:
    if op is None:
        return lambda u: Field.zeros(u.domain)
    if isinstance(op, OperatorContext):
        return lambda u: apply_B(u, op)
    return op


def _apply_A(law: PointwiseLaw, B: Callable[[Field], Field], u: Field) -> Field:
    return nemyckii_apply(law, u) + B(u)


def residual(law: PointwiseLaw, op: Operator, u: Field, g: Field) -> float:
    """``||F(u) + Bu - g|| / max(||g||, eps)``."""
    r = _apply_A(law, _operator(op), u) - g
    return l2_norm(r) / max(l2_norm(g), _EPS)


def _check_inputs(law: PointwiseLaw, g: Field):
    if g.dim != law.dim:
        raise ValueError("law and right-hand side dimensions differ")
    para = set(paravector_blades(g.dim))
    if not set(law.blades) <= para:
        raise ValueError("law arguments must be paravector blades")
    off = np.ones(g.values.shape[1], dtype=bool)
    off[list(law.blades)] = False
    vals = g.values
    scale = max(float(np.abs(vals).max()), _EPS)
    if np.abs(vals[:, off]).max(initial=0.0) > SUBSPACE_RTOL * scale:
        raise ValueError("right-hand side has content outside the law's paravector blades")
    if np.abs(vals.imag).max() > SUBSPACE_RTOL * scale:
        raise ValueError("right-hand side must be real")


def _project(law: PointwiseLaw, u: Field) -> Field:
    """Clear roundoff outside the law's real argument space; reject genuine leakage."""
    vals = u.values
    keep = np.zeros(vals.shape[1], dtype=bool)
    keep[list(law.blades)] = True
    scale = max(float(np.abs(vals).max()), _EPS)
    leak = max(float(np.abs(vals[:, ~keep]).max(initial=0.0)), float(np.abs(vals.imag).max()))
    if leak > SUBSPACE_RTOL * scale:
        raise ValueError(
            f"iterate left the law's real argument subspace (relative leak {leak / scale:.2e}); "
            "the operator does not preserve it"
        )
    out = np.zeros_like(vals)
    out[:, keep] = vals[:, keep].real
    return Field(u.domain, out)


def initial_guess(law: PointwiseLaw, g: Field, seed: int | None) -> Field:
    """Zero field, or a seeded random field in the law's argument blades."""
    if seed is None:
        return Field.zeros(g.domain)
    rng = np.random.default_rng(seed)
    rms = l2_norm(g) / math.sqrt(g.domain.volume) if l2_norm(g) > 0 else 1.0
    vals = np.zeros_like(g.values)
    vals[:, list(law.blades)] = rms * rng.standard_normal((g.domain.size, law.m))
    return Field(g.domain, vals)


def solve_monotone(law: PointwiseLaw, op: Operator, g: Field, cfg: SolveConfig,
                   u0: Field | None = None) -> SolveResult:
    """Iterate ``u <- u - t (F(u) + Bu - g)`` until the relative residual drops below ``cfg.tol``.

    ``op`` is an :class:`OperatorContext` (B applied through its matrices),
    any callable ``Field -> Field``, or None for the zero operator.
    """
    _check_inputs(law, g)
    B = _operator(op)
    t = cfg.step_size()
    q = None
    if cfg.c is not None and cfg.L is not None and cfg.c > 0:
        try:
            q = contraction_factor(cfg.c, cfg.lipschitz_A, t)
        except ValueError:
            q = None
    gnorm = max(l2_norm(g), _EPS)
    u = initial_guess(law, g, cfg.seed) if u0 is None else _project(law, u0)
    history: list[float] = []
    growing = 0
    for k in range(cfg.max_iter + 1):
        r = _apply_A(law, B, u) - g
        res = l2_norm(r) / gnorm
        if not math.isfinite(res):
            raise SolverDivergence(f"non-finite residual at iteration {k}", history)
        if history and res > history[-1]:
            growing += 1
            if growing >= DIVERGENCE_WINDOW:
                raise SolverDivergence(
                    f"residual grew for {DIVERGENCE_WINDOW} consecutive iterations "
                    f"(step {t:.3g}, last residual {res:.3e}); the declared c and L "
                    "are likely wrong for this law",
                    history + [res],
                )
        else:
            growing = 0
        history.append(res)
        if res <= cfg.tol:
            return SolveResult(u, k, history, True, q, t)
        if k == cfg.max_iter:
            break
        u = _project(law, u - r * t)
    return SolveResult(u, cfg.max_iter, history, False, q, t)


def observed_decay_rate(residuals, skip: int = 3) -> float:
    """Largest one-step ratio ``r_{k+1} / r_k`` after the first ``skip`` steps."""
    r = np.asarray(residuals, dtype=float)[skip:]
    r = r[r > 0]
    if len(r) < 2:
        return 0.0
    return float(np.max(r[1:] / r[:-1]))


def uniqueness_probe(law: PointwiseLaw, op: Operator, g: Field, cfg: SolveConfig,
                     seeds=(1, 2)) -> float:
    """Relative L2 distance between solutions started from two random guesses."""
    sols = []
    for s in seeds:
        run = SolveConfig(cfg.step, cfg.tol, cfg.max_iter, s, cfg.c, cfg.L)
        res = solve_monotone(law, op, g, run)
        if not res.converged:
            raise RuntimeError(f"solve from seed {s} did not converge")
        sols.append(res.solution)
    return l2_norm(sols[0] - sols[1]) / max(l2_norm(sols[0]), _EPS)
