import json
import math

import numpy as np
import pytest

from conftest import ball_context
from monoclifford.grid import Field, l2_norm, off_subspace_ratio
from monoclifford.algebra import paravector_blades
from monoclifford.nemyckii import (
    check_lipschitz,
    check_monotone,
    identity_law,
    shifted_identity_law,
)
from monoclifford.solver import (
    SolveConfig,
    SolverDivergence,
    contraction_factor,
    observed_decay_rate,
    residual,
    solve_monotone,
    uniqueness_probe,
)


def random_rhs(domain, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return Field.paravector(domain, scale * rng.standard_normal((domain.size, domain.n + 1)))


def dense_linear_solution(ctx, g: Field, c: float = 1.0) -> Field:
    """Solve ``(c I + B) u = g`` with the assembled matrix (LU)."""
    rhs = g.paravector_part().T.reshape(-1)
    A = c * np.eye(len(rhs)) + ctx.dense_B
    x = np.linalg.solve(A, rhs)
    return Field.paravector(g.domain, x.reshape(ctx.n + 1, -1).T)


# -- contraction factor ----------------------------------------------------------


def test_contraction_factor_examples():
    assert contraction_factor(1.0, 1.0, 1.0) == 0.0
    assert contraction_factor(1.0, 2.0, 0.25) == pytest.approx(math.sqrt(3) / 2, rel=1e-15)
    q = [contraction_factor(1.0, 2.0, t) for t in (1e-2, 1e-4, 1e-8)]
    assert all(v < 1 for v in q) and q[0] < q[1] < q[2]
    assert 1 - q[2] < 1e-7


def test_contraction_factor_minimized_at_auto_step():
    c, LA = 0.7, 2.3
    t_star = c / LA**2
    best = contraction_factor(c, LA, t_star)
    for t in np.linspace(0.05, 1.95, 20) * 2 * c / LA**2 / 2:
        assert contraction_factor(c, LA, t) >= best - 1e-15


@pytest.mark.parametrize("args", [(0.0, 1.0, 0.1), (1.0, 0.5, 0.1), (1.0, 2.0, 0.5), (1.0, 2.0, 0.0)])
def test_contraction_factor_rejects_bad_parameters(args):
    with pytest.raises(ValueError):
        contraction_factor(*args)


# -- configuration -----------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(tol=0.0, c=1.0, L=1.0)
    with pytest.raises(ValueError):
        SolveConfig(max_iter=0, c=1.0, L=1.0)
    with pytest.raises(ValueError):
        SolveConfig()  # auto step without constants
    with pytest.raises(ValueError):
        SolveConfig(c=2.0, L=1.0)
    with pytest.raises(ValueError):
        SolveConfig(step=-0.1)
    with pytest.raises(ValueError):
        SolveConfig(step="fast")
    cfg = SolveConfig(c=1.0, L=2.0)
    assert cfg.lipschitz_A == 3.0
    assert cfg.step_size() == pytest.approx(1 / 9)


def test_config_from_property_reports():
    ctx = ball_context(6)
    law = shifted_identity_law(3)
    mono = check_monotone(law, ctx.domain, 5000)
    lip = check_lipschitz(law, ctx.domain, 5000)
    cfg = SolveConfig.from_reports(mono, lip, tol=1e-9)
    assert cfg.c == mono.estimates["modulus"] and cfg.c >= 1.0 - 1e-12
    assert cfg.L == 2.0 and cfg.tol == 1e-9
    bad = check_monotone(identity_law(3, scale=-1.0), ctx.domain, 1000)
    with pytest.raises(ValueError):
        SolveConfig.from_reports(bad, lip)


# -- solving ---------------------------------------------------------------------


def test_identity_without_operator_converges_in_one_step():
    ctx = ball_context(6)
    g = random_rhs(ctx.domain, 0)
    res = solve_monotone(identity_law(3), None, g, SolveConfig(step=1.0))
    assert res.converged and res.iterations == 1
    assert np.array_equal(res.solution.values, g.values)
    assert res.residuals == [1.0, 0.0]


def test_linear_case_matches_dense_solve():
    ctx = ball_context(8)
    g = random_rhs(ctx.domain, 1)
    res = solve_monotone(identity_law(3), ctx, g, SolveConfig(c=1.0, L=1.0))
    assert res.converged
    oracle = dense_linear_solution(ctx, g)
    assert l2_norm(res.solution - oracle) / l2_norm(oracle) <= 1e-6
    assert residual(identity_law(3), ctx, oracle, g) <= 1e-8


def test_nonlinear_case_converges_with_certified_rate():
    ctx = ball_context(8)
    law = shifted_identity_law(3)
    g = random_rhs(ctx.domain, 2, scale=0.1)
    cfg = SolveConfig(c=1.0, L=2.0)
    res = solve_monotone(law, ctx, g, cfg)
    assert res.converged and res.residuals[-1] <= cfg.tol
    assert residual(law, ctx, res.solution, g) == pytest.approx(res.residuals[-1], rel=1e-12, abs=1e-300)
    assert res.q == pytest.approx(contraction_factor(1.0, 3.0, 1 / 9))
    assert observed_decay_rate(res.residuals) <= res.q
    assert all(r > 0 for r in res.residuals[:-1])


@pytest.mark.parametrize("c", [1.0, 2.0, 0.5])
def test_linear_decay_rate_bounded_by_q(c):
    ctx = ball_context(8)
    law = identity_law(3, scale=c)
    g = random_rhs(ctx.domain, 3)
    res = solve_monotone(law, ctx, g, SolveConfig(c=c, L=c))
    assert res.converged
    assert observed_decay_rate(res.residuals) <= res.q
    oracle = dense_linear_solution(ctx, g, c)
    assert l2_norm(res.solution - oracle) / l2_norm(oracle) <= 1e-6


def test_solution_stays_paravector():
    ctx = ball_context(6)
    g = random_rhs(ctx.domain, 4)
    res = solve_monotone(shifted_identity_law(3), ctx, g, SolveConfig(c=1.0, L=2.0))
    assert off_subspace_ratio(res.solution, paravector_blades(3)) <= 1e-10
    assert np.all(res.solution.values.imag == 0)


def test_uniqueness_probe():
    ctx = ball_context(8)
    g = random_rhs(ctx.domain, 5, scale=0.1)
    cfg = SolveConfig(c=1.0, L=2.0)
    assert uniqueness_probe(shifted_identity_law(3), ctx, g, cfg) <= 10 * cfg.tol


def test_residual_examples():
    ctx = ball_context(6)
    g = random_rhs(ctx.domain, 6)
    assert residual(identity_law(3), ctx, Field.zeros(ctx.domain), g) == 1.0


def test_zero_rhs_returns_zero_immediately():
    ctx = ball_context(6)
    res = solve_monotone(shifted_identity_law(3), ctx, Field.zeros(ctx.domain), SolveConfig(c=1.0, L=2.0))
    assert res.converged and res.iterations == 0 and l2_norm(res.solution) == 0


def test_iteration_budget_exhausted():
    ctx = ball_context(6)
    g = random_rhs(ctx.domain, 7)
    res = solve_monotone(identity_law(3), ctx, g, SolveConfig(c=1.0, L=1.0, max_iter=3))
    assert not res.converged and res.iterations == 3 and len(res.residuals) == 4


def test_divergence_reported():
    ctx = ball_context(6)
    g = random_rhs(ctx.domain, 8)
    # -u claims to be monotone; the iteration then grows without bound
    liar = identity_law(3, scale=-1.0)
    with pytest.raises(SolverDivergence) as info:
        solve_monotone(liar, ctx, g, SolveConfig(c=1.0, L=1.0))
    r = info.value.residuals
    assert len(r) > 50 and all(b > a for a, b in zip(r[-51:-1], r[-50:]))


def test_non_paravector_rhs_rejected():
    ctx = ball_context(6)
    g = random_rhs(ctx.domain, 9)
    vals = g.values.copy()
    vals[:, 3] = 1.0
    bad = Field(g.domain, vals)
    with pytest.raises(ValueError):
        solve_monotone(identity_law(3), ctx, bad, SolveConfig(c=1.0, L=1.0))
    cplx = Field(g.domain, g.values * 1j)
    with pytest.raises(ValueError):
        solve_monotone(identity_law(3), ctx, cplx, SolveConfig(c=1.0, L=1.0))


def test_complex_operator_with_real_law_rejected():
    ctx = ball_context(6, (1.0, 0.5, -0.2, 0.1))
    g = random_rhs(ctx.domain, 10)
    with pytest.raises(ValueError, match="subspace"):
        solve_monotone(identity_law(3), ctx, g, SolveConfig(c=1.0, L=1.0))


def test_callable_operator_and_initial_guess():
    ctx = ball_context(6)
    g = random_rhs(ctx.domain, 11)
    half = lambda u: u * 0.5
    res = solve_monotone(identity_law(3), half, g, SolveConfig(c=1.0, L=1.0), u0=g)
    assert res.converged
    assert l2_norm(res.solution - g * (1 / 1.5)) / l2_norm(g) < 1e-7


def test_result_json():
    ctx = ball_context(6)
    g = random_rhs(ctx.domain, 12)
    res = solve_monotone(identity_law(3), ctx, g, SolveConfig(c=1.0, L=1.0))
    data = json.loads(res.to_json())
    assert {"converged", "iterations", "residuals", "q"} <= set(data)
    assert data["iterations"] == len(data["residuals"]) - 1
