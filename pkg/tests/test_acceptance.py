"""End-to-end acceptance runs, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion still reports its measured figures.
"""

import math
import time

import numpy as np

from conftest import ball_context, record
from monoclifford.algebra import Paravector, norm
from monoclifford.grid import Field, l2_norm, make_domain
from monoclifford.kernels import KernelParams, kernel_split_difference, sigma_n, small_argument_constant
from monoclifford.magneto import MagnetoProblem, MHCurveSpec, demag_factor, solve_magnetization, verify_inequalities
from monoclifford.nemyckii import (
    check_coercive,
    check_growth,
    check_lipschitz,
    check_monotone,
    check_positivity,
    identity_law,
    replay,
    saturating_law,
    shifted_identity_law,
    tuple_law,
)
from monoclifford.operators import (
    borel_pompeiu_residual,
    dense_singular_values,
    gaussian_bump,
    operator_norm_estimate,
    random_paravector_field,
    subspace_preservation_check,
    symmetrized_eigenvalues,
)
from monoclifford.selfcheck import algebra_suite, bessel_suite
from monoclifford.solver import SolveConfig, observed_decay_rate, residual, solve_monotone

ROUNDOFF = 1e-12


def nonincreasing(values) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


def strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def test_criterion_01_algebra_suite():
    t0 = time.perf_counter()
    results = algebra_suite()
    elapsed = time.perf_counter() - t0
    worst = max(r.error for r in results)
    ok = all(r.passed for r in results) and worst <= 1e-12 and elapsed <= 10
    record(1, "algebra suite", ok, f"max error {worst:.2e}, {elapsed:.1f} s")
    assert ok


def test_criterion_02_bessel_suite():
    t0 = time.perf_counter()
    results = bessel_suite()
    elapsed = time.perf_counter() - t0
    errs = {r.name: r.error for r in results}
    recursion = errs["MacDonald recursion residual"]
    paths = errs["half-integer closed form vs quadrature"]
    ok = all(r.passed for r in results) and recursion <= 1e-6 and paths <= 1e-10 and elapsed <= 5
    record(2, "Bessel suite", ok, f"recursion {recursion:.2e}, closed form vs quadrature {paths:.2e}, {elapsed:.1f} s")
    assert ok


def test_criterion_03_kernel_asymptotics():
    t0 = time.perf_counter()
    p = KernelParams(3, Paravector(1.0, (0.5, -0.3, 0.2)))
    const = small_argument_constant(1e-4, KernelParams(3, Paravector(1.0, (0.0, 0.0, 0.0))))
    const_err = abs(const * sigma_n(3) - 1)
    d = np.array([1.0, 2.0, -1.0]) / math.sqrt(6)
    radii = np.geomspace(1e-3, 1e-1, 9)
    scaled = [r**2 * norm(kernel_split_difference(r * d, p)) for r in radii]
    tau = float(np.polyfit(np.log(radii), np.log(scaled), 1)[0])
    elapsed = time.perf_counter() - t0
    ok = const_err <= 0.01 and tau > 0 and elapsed <= 5
    record(3, "kernel asymptotics", ok, f"constant off by {const_err:.2e}, decay exponent {tau:.3f}, {elapsed:.1f} s")
    assert ok


def test_criterion_04_positivity():
    eps, times = [], []
    for N in (6, 8, 10):
        t0 = time.perf_counter()
        lam = symmetrized_eigenvalues(ball_context(N))[0]
        times.append(time.perf_counter() - t0)
        eps.append(max(0.0, -lam) if -lam > ROUNDOFF else 0.0)
    ok = eps[-1] <= 0.05 and nonincreasing(eps) and times[-1] <= 300
    record(4, "positivity of B", ok, f"eps(6,8,10) = {eps}, N=10 in {times[-1]:.1f} s")
    assert ok


def test_criterion_05_norm_bound():
    deltas, sigmas, gaps = [], [], []
    t0 = time.perf_counter()
    for N in (6, 8, 10):
        ctx = ball_context(N)
        sigma = float(dense_singular_values(ctx)[0])
        est = operator_norm_estimate(ctx, iterations=200).value
        sigmas.append(sigma)
        deltas.append(max(0.0, sigma - 1.0))
        gaps.append(abs(est - sigma) / sigma)
    elapsed = time.perf_counter() - t0
    ok = deltas[-1] <= 0.15 and nonincreasing(deltas) and max(gaps) <= 0.02 and elapsed <= 300
    record(5, "norm bound", ok, f"sigma_max(6,8,10) = {[round(s, 4) for s in sigmas]}, "
           f"delta = {deltas}, power iteration gap <= {max(gaps):.1e}")
    assert ok


def test_criterion_06_borel_pompeiu():
    interior, exterior = [], []
    t0 = time.perf_counter()
    for N in (8, 10, 12):
        ctx = ball_context(N)
        bp = borel_pompeiu_residual(gaussian_bump(ctx.domain), ctx)
        interior.append(bp.interior)
        exterior.append(bp.exterior)
    elapsed = time.perf_counter() - t0
    ok = interior[-1] <= 0.15 and strictly_decreasing(interior) and strictly_decreasing(exterior) and elapsed <= 600
    record(6, "Borel-Pompeiu residual", ok, f"interior(8,10,12) = {[round(v, 4) for v in interior]}, "
           f"exterior = {[round(v, 4) for v in exterior]}")
    assert ok


def test_criterion_07_subspace_preservation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    statuses = []
    for a in ((1.0, 0.5, -0.2, 0.1), (0.3, 0.0, 0.0, 0.0)):
        ctx = ball_context(8, a)
        for _ in range(3):
            rep = subspace_preservation_check(random_paravector_field(ctx.domain, rng), ctx)
            statuses.append((rep.subspace, rep.status))
            worst = max(worst, rep.off_ratio)
    for a in ((0.0, 0.0, 0.0, 0.0), (0.0, 0.5, -0.2, 0.1)):
        ctx = ball_context(8, a)
        for _ in range(3):
            u = Field.vector(ctx.domain, rng.standard_normal((ctx.domain.size, 3)))
            rep = subspace_preservation_check(u, ctx)
            statuses.append((rep.subspace, rep.status))
            worst = max(worst, rep.off_ratio)
    elapsed = time.perf_counter() - t0
    ok = all(s == "pass" for _, s in statuses) and {k for k, _ in statuses} == {"paravector", "vector"} \
        and worst <= 1e-10 and elapsed <= 60
    record(7, "subspace preservation", ok, f"max off-subspace ratio {worst:.1e}, {elapsed:.1f} s")
    assert ok


def test_criterion_08_nemyckii_checkers():
    samples = 100_000
    t0 = time.perf_counter()
    box = make_domain([[0, 1]] * 3, 4)
    negation = identity_law(3, scale=-1.0)
    zero = lambda x: np.zeros(len(x))
    shifted = tuple_law(lambda x, u: u - 1, 3, (0,))
    cases = [
        (identity_law(3), lambda l: check_monotone(l, box, samples), True),
        (negation, lambda l: check_monotone(l, box, samples), False),
        (saturating_law(3), lambda l: check_monotone(l, box, samples), True),
        (identity_law(3), lambda l: check_positivity(l, box, samples), True),
        (negation, lambda l: check_positivity(l, box, samples), False),
        (negation, lambda l: check_positivity(l, box, samples, variant="asymptotic", R=2.0), False),
        (shifted, lambda l: check_positivity(l, box, samples), False),
        (shifted, lambda l: check_positivity(l, box, samples, variant="asymptotic", R=2.0), True),
        (identity_law(3, scale=3.0), lambda l: check_lipschitz(l, box, samples), True),
        (saturating_law(3), lambda l: check_lipschitz(l, box, samples), True),
        (saturating_law(3), lambda l: check_growth(l, box, samples), True),
        (shifted_identity_law(3), lambda l: check_coercive(l, box, samples), True),
        (tuple_law(lambda x, u: u, 3, (0,), coercive=(2.0, zero)), lambda l: check_coercive(l, box, samples), False),
    ]
    wrong, unreplayed = 0, 0
    for law, check, expect in cases:
        rep = check(law)
        wrong += rep.passed != expect
        if not rep.passed:
            unreplayed += not replay(law, rep)
    elapsed = time.perf_counter() - t0
    ok = wrong == 0 and unreplayed == 0 and elapsed <= 30
    record(8, "Nemyckii checkers", ok, f"{len(cases) - wrong}/{len(cases)} verdicts as expected, "
           f"{unreplayed} counterexamples failed to replay, {elapsed:.1f} s")
    assert ok


def test_criterion_09_solver():
    t0 = time.perf_counter()
    ctx = ball_context(8)
    rng = np.random.default_rng(9)
    g = Field.paravector(ctx.domain, rng.standard_normal((ctx.domain.size, 4)))
    lin = solve_monotone(identity_law(3), ctx, g, SolveConfig(c=1.0, L=1.0))
    rhs = g.paravector_part().T.reshape(-1)
    x = np.linalg.solve(np.eye(len(rhs)) + ctx.dense_B, rhs)
    oracle = Field.paravector(ctx.domain, x.reshape(4, -1).T)
    lu_err = l2_norm(lin.solution - oracle) / l2_norm(oracle)
    lin_rate = observed_decay_rate(lin.residuals)

    law = shifted_identity_law(3)
    g_small = g * 0.1
    cfg = SolveConfig(c=1.0, L=2.0)
    nl = solve_monotone(law, ctx, g_small, cfg)
    nl_res = residual(law, ctx, nl.solution, g_small)
    nl_rate = observed_decay_rate(nl.residuals)
    elapsed = time.perf_counter() - t0
    ok = (lin.converged and lu_err <= 1e-6 and lin_rate <= lin.q
          and nl.converged and nl_res <= 1e-8 and nl_rate <= nl.q and elapsed <= 120)
    record(9, "solver", ok, f"linear vs LU {lu_err:.1e} (rate {lin_rate:.3f} <= q {lin.q:.3f}); "
           f"nonlinear residual {nl_res:.1e} after {nl.iterations} steps (rate {nl_rate:.3f} <= q {nl.q:.3f})")
    assert ok


def test_criterion_10_magneto_inequalities_and_demag_factor():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    failures = 0
    worst_ratio = -np.inf
    factors = []
    for N in (8, 10, 12):
        ctx = ball_context(N)
        delta = max(0.0, float(dense_singular_values(ctx)[0]) - 1.0)
        fields = []
        for curve in (MHCurveSpec("linear", {"chi": 1.0}),
                      MHCurveSpec("saturating", {"chi0": 2.0, "M_s": 1.0, "beta": 0.5})):
            H_a = Field.vector(ctx.domain, np.tile([0.0, 0.2, 1.0], (ctx.domain.size, 1)))
            res = solve_magnetization(MagnetoProblem(ctx.domain, curve, H_a), ctx)
            failures += not res.converged
            fields.append(res.solution)
        fields += [Field.vector(ctx.domain, rng.standard_normal((ctx.domain.size, 3))) for _ in range(100)]
        for M in fields:
            rep = verify_inequalities(M, ctx, eps=1e-6, delta=delta)
            failures += not (rep.ineq2_pass and rep.ineq3_pass)
            worst_ratio = max(worst_ratio, rep.hi_dot_m / rep.m_norm_sq)
        factors.append(demag_factor(ctx))
    errs = [abs(f * 3 - 1) for f in factors]
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and errs[-1] <= 0.15 and strictly_decreasing(errs) and elapsed <= 600
    record(10, "magnetization inequalities and demagnetizing factor", ok,
           f"{failures} failures, max (H_i,M)/|M|^2 = {worst_ratio:.3e}, "
           f"factor(8,10,12) = {[round(f, 4) for f in factors]}, {elapsed:.1f} s")
    assert ok
