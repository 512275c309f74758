import logging

import numpy as np
import pytest

from compgn import CompositeProblem, SmoothMap, model_h, objective, registry
from compgn.convex import HalfSquaredL2, L1Norm, Linear, Rn, Box
from compgn.driver import (BACKTRACK_BUDGET, CONVERGED, DIVERGING, INNER_FAILURE, OUTER_BUDGET,
                           BacktrackBudgetError, SolverConfig, backtracking_step, run)
from compgn.diagnostics import step_acceptance_violations


def identity(n):
    return SmoothMap(n, n, lambda x: x.copy(), lambda x: np.eye(n))


def quartic():
    F = SmoothMap(1, 1, lambda x: x ** 4, lambda x: np.array([[4 * x[0] ** 3]]),
                  hess_vec=lambda x, v, d: 12 * x ** 2 * v * d)
    return CompositeProblem(F, Linear([1.0]), Rn(1))


def test_quartic_hand_trace():
    P = quartic()
    res = backtracking_step(P, [1.0], SolverConfig(mu0=1.0, tau=2.0))
    assert res.mu == 16.0
    assert res.backtracks == 4
    assert abs(res.x_next[0] - 0.75) <= 1e-12
    # each rejected candidate y = 1 - 4/mu violates the test, the accepted one passes
    for mu in (1.0, 2.0, 4.0, 8.0, 16.0):
        y = 1.0 - 4.0 / mu
        lhs = y ** 4
        rhs = 1.0 + 4.0 * (y - 1.0) + 0.5 * mu * (y - 1.0) ** 2
        assert (lhs <= rhs) == (mu == 16.0)


def test_step_at_critical_point():
    P = CompositeProblem(identity(2), HalfSquaredL2(2), Rn(2))
    res = backtracking_step(P, [0.0, 0.0])
    assert res.backtracks == 0
    np.testing.assert_array_equal(res.x_next, [0.0, 0.0])


@pytest.mark.parametrize("g", [HalfSquaredL2(2), L1Norm(2), Linear([1.0, -2.0])])
@pytest.mark.parametrize("mu0", [1e-3, 1.0, 50.0])
def test_affine_map_never_backtracks(g, mu0):
    P = CompositeProblem(identity(2), g, Rn(2))
    res = backtracking_step(P, [0.3, -1.2], SolverConfig(mu0=mu0))
    assert res.backtracks == 0
    assert res.mu == mu0


def test_ridge_recursion():
    P = CompositeProblem(identity(2), HalfSquaredL2(2), Rn(2))
    out = run(P, [1.0, 1.0], SolverConfig(mu0=1.0))
    assert out.status == CONVERGED
    x = np.array([1.0, 1.0])
    for rec in out.trace:
        np.testing.assert_allclose(rec.x, x, rtol=1e-12, atol=1e-300)
        assert rec.mu_k == 1.0 and rec.backtracks == 0
        x = rec.mu_k * x / (1.0 + rec.mu_k)
    assert np.linalg.norm(out.final_x) <= 1e-7


def test_rosenbrock_converges():
    out = run(registry.rosenbrock_ls(), [-1.2, 1.0])
    assert out.status == CONVERGED
    assert out.final_objective <= 1e-12
    assert out.final_criticality <= 1e-6
    assert np.linalg.norm(out.final_x - 1.0) <= 1e-5
    assert out.iterations <= 500


def test_linear_unbounded_diverges():
    entry = registry.get("linear-unbounded")
    out = run(entry.build(), entry.x0, SolverConfig().with_overrides(**entry.solver_overrides))
    assert out.status == DIVERGING
    assert out.iterations <= 200
    assert out.final_x[0] < 0


@pytest.mark.parametrize("name", registry.benchmark_names())
def test_registry_runs(name):
    entry = registry.get(name)
    P = entry.build()
    cfg = SolverConfig()
    out = run(P, entry.x0, cfg)
    assert out.status == CONVERGED
    # accepted-step inequality and monotone objective
    assert np.max(step_acceptance_violations(P, out)) <= 1e-8
    obj = [r.objective for r in out.trace] + [out.final_objective]
    assert np.max(np.diff(obj)) <= 1e-9
    for r in out.trace:
        assert P.D.contains(r.x, 1e-10)
        assert r.backtracks <= cfg.max_backtracks_per_iteration
        j = np.log2(r.mu_k / cfg.mu0)
        assert j == round(j) and r.backtracks == round(j)
    assert out.final_criticality <= 10 * cfg.step_tolerance * (1 + out.mu_final)
    steps = np.array([r.step_norm for r in out.trace])
    assert np.isfinite(out.trace[-1].cumulative_step)
    assert out.trace[-1].cumulative_step == pytest.approx(steps.sum())
    half = len(steps) // 2
    assert steps[half:].sum() <= steps[:half].sum() or len(steps) < 2
    if entry.optimum is not None:
        np.testing.assert_allclose(out.final_x, entry.optimum, atol=1e-5)
        assert out.final_objective == pytest.approx(entry.optimum_value, abs=1e-9)


def test_stationary_start_stops_immediately():
    P = registry.rosenbrock_ls()
    out = run(P, [1.0, 1.0])
    assert out.status == CONVERGED
    assert out.iterations == 1
    assert out.trace[0].step_norm == 0.0


def test_infeasible_start_is_projected(caplog):
    P = registry.box_quartic()
    with caplog.at_level(logging.WARNING):
        out = run(P, [5.0, 5.0])
    assert out.x0_projected
    np.testing.assert_array_equal(out.trace[0].x, [2.0, 1.5])
    assert any("projecting" in m for m in caplog.messages)


def test_budget_statuses():
    out = run(registry.rosenbrock_ls(), [-1.2, 1.0], SolverConfig(max_outer_iterations=3))
    assert out.status == OUTER_BUDGET and out.iterations == 3
    out = run(quartic(), [1.0], SolverConfig(max_backtracks_per_iteration=2))
    assert out.status == BACKTRACK_BUDGET and out.iterations == 0
    out = run(registry.l1_exp_fit(), [1.0, 0.0],
              SolverConfig().with_overrides(max_inner_iterations=1))
    assert out.status == INNER_FAILURE
    with pytest.raises(BacktrackBudgetError):
        backtracking_step(quartic(), [1.0], SolverConfig(max_backtracks_per_iteration=3))


def test_config_validation_and_overrides():
    for bad in ({"tau": 1.0}, {"mu0": 0.0}, {"step_tolerance": -1.0},
                {"max_outer_iterations": 0}):
        with pytest.raises(ValueError):
            SolverConfig(**bad)
    cfg = SolverConfig().with_overrides(tolerance=1e-6, mu0=3.0)
    assert cfg.inner.tolerance == 1e-6 and cfg.mu0 == 3.0


def test_without_reset_mu_is_nondecreasing():
    out = run(registry.rosenbrock_ls(), [-1.2, 1.0], SolverConfig(reset_mu_each_iteration=False))
    assert out.status == CONVERGED
    mus = [r.mu_k for r in out.trace]
    assert all(b >= a for a, b in zip(mus, mus[1:]))


def test_trace_records_model_value():
    P = registry.minimax_quad()
    out = run(P, [2.0, 2.0])
    xs = [r.x for r in out.trace] + [out.final_x]
    for k, r in enumerate(out.trace):
        d = xs[k + 1] - r.x
        assert r.model_value == pytest.approx(model_h(P, r.x, xs[k + 1]) + 0.5 * r.mu_k * d @ d,
                                              abs=1e-12)
        assert r.objective == objective(P, r.x)
        assert r.criticality == r.step_norm
