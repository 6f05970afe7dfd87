"""Invariant suites for the algebra and the MacDonald functions, runnable without pytest."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .algebra import (
    Multivector,
    batch_product,
    bar_signs,
    sign_table,
)
from .special import bessel_k_half_integer, bessel_k_integral, bessel_k_recursion_residual, gamma_fn

RECURSION_ORDERS = (0.5, 1.0, 1.5, 2.0)
RECURSION_ARGS = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tol)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.error:.3e} (tol {self.tol:g})"


def blade_relations(max_dim: int = 4) -> CheckResult:
    """``e_i e_k + e_k e_i = -2 delta_ik`` for all generator pairs."""
    err = 0.0
    for dim in range(1, max_dim + 1):
        for i, k in itertools.product(range(dim), repeat=2):
            a, b = Multivector.e(dim, i + 1), Multivector.e(dim, k + 1)
            s = a * b + b * a
            expect = Multivector.scalar(dim, -2.0 if i == k else 0.0)
            err = max(err, float(np.abs(s.coeffs - expect.coeffs).max()))
    return CheckResult("generator anticommutation, n<=4", err, 0.0)


def blade_associativity(max_dim: int = 4) -> CheckResult:
    bad = 0
    for dim in range(1, max_dim + 1):
        T = sign_table(dim)
        size = 1 << dim
        for I, J, K in itertools.product(range(size), repeat=3):
            left = T[I, J] * T[I ^ J, K]
            right = T[J, K] * T[I, J ^ K]
            bad += int(left != right)
    return CheckResult("blade associativity, n<=4", float(bad), 0.0)


def _random(rng, count, dim, real=False):
    vals = rng.standard_normal((count, 1 << dim))
    if not real:
        vals = vals + 1j * rng.standard_normal((count, 1 << dim))
    return vals


def anti_automorphisms(samples: int = 1000, seed: int = 0, max_dim: int = 4) -> CheckResult:
    """``bar(ab) = bar(b) bar(a)`` and ``tilde(ab) = tilde(b) tilde(a)`` on random pairs."""
    rng = np.random.default_rng(seed)
    err = 0.0
    for dim in range(1, max_dim + 1):
        s = bar_signs(dim)
        a, b = _random(rng, samples, dim), _random(rng, samples, dim)
        ab = batch_product(dim, a, b)
        err = max(err, np.abs(ab * s - batch_product(dim, b * s, a * s)).max())
        tl = lambda c: np.conj(c) * s
        err = max(err, np.abs(tl(ab) - batch_product(dim, tl(b), tl(a))).max())
    return CheckResult("anti-automorphism of bar and tilde", float(err), 1e-12)


def paravector_norm_identity(samples: int = 1000, seed: int = 0, max_dim: int = 4) -> CheckResult:
    """``bar(a) a = |a|^2`` for real paravectors."""
    rng = np.random.default_rng(seed)
    err = 0.0
    for dim in range(1, max_dim + 1):
        a = np.zeros((samples, 1 << dim))
        a[:, 0] = rng.standard_normal(samples)
        for j in range(dim):
            a[:, 1 << j] = rng.standard_normal(samples)
        prod = batch_product(dim, a * bar_signs(dim), a)
        expect = np.zeros_like(prod)
        expect[:, 0] = np.sum(a**2, axis=1)
        err = max(err, np.abs(prod - expect).max())
    return CheckResult("bar(a) a = |a|^2 for paravectors", float(err), 1e-12)


def bessel_recursion() -> CheckResult:
    worst = max(bessel_k_recursion_residual(p, t) for p in RECURSION_ORDERS for t in RECURSION_ARGS)
    return CheckResult("MacDonald recursion residual", float(worst), 1e-6)


def bessel_paths(orders=(0.5, 1.5, 2.5, 3.5, 4.5, 5.5)) -> CheckResult:
    """Half-integer closed forms against the general-order quadrature."""
    t = np.geomspace(1e-6, 50.0, 200)
    err = 0.0
    for p in orders:
        a = bessel_k_half_integer(p, t)
        b = bessel_k_integral(p, t)
        err = max(err, float(np.max(np.abs(a - b) / np.abs(a))))
    return CheckResult("half-integer closed form vs quadrature", err, 1e-10)


def gamma_values() -> CheckResult:
    err = max(
        abs(gamma_fn(1.0) - 1.0),
        abs(gamma_fn(0.5) - math.sqrt(math.pi)) / math.sqrt(math.pi),
        abs(gamma_fn(1.5) - math.sqrt(math.pi) / 2) / (math.sqrt(math.pi) / 2),
    )
    return CheckResult("gamma reference values", float(err), 1e-12)


def algebra_suite() -> list[CheckResult]:
    return [blade_relations(), blade_associativity(), anti_automorphisms(), paravector_norm_identity()]


def bessel_suite() -> list[CheckResult]:
    return [bessel_recursion(), bessel_paths(), gamma_values()]
