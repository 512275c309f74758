import numpy as np
import pytest
from oracles import affine_problem, brute_force_subproblem, random_instance

from compgn import (CompositeProblem, InnerBudgetError, InnerConfig, SmoothMap,
                    criticality_measure, model_h, objective, registry, solve_subproblem)
from compgn.convex import Box, HalfSquaredL2, L1Norm, Linear, Rn
from compgn.diagnostics import sample_points
from compgn.subproblem import operator_norm


def identity(n):
    return SmoothMap(n, n, lambda x: x.copy(), lambda x: np.eye(n))


def ridge_problem():
    return CompositeProblem(identity(1), HalfSquaredL2(1), Rn(1))


def test_ridge_example():
    sol = solve_subproblem(ridge_problem(), [2.0], 1.0)
    np.testing.assert_allclose(sol.p, [1.0], atol=1e-12)
    assert sol.value == pytest.approx(1.0, abs=1e-12)


def test_ridge_closed_form_random(rng):
    for _ in range(100):
        n = int(rng.integers(1, 5))
        P = CompositeProblem(identity(n), HalfSquaredL2(n), Rn(n))
        x, mu = rng.uniform(-10, 10, n), float(rng.uniform(0.01, 100))
        np.testing.assert_allclose(solve_subproblem(P, x, mu).p, mu * x / (1 + mu),
                                   rtol=0, atol=1e-10)


def test_critical_point_is_fixed():
    F = SmoothMap(1, 1, lambda x: x ** 2, lambda x: np.array([[2 * x[0]]]))
    P = CompositeProblem(F, L1Norm(1), Rn(1))
    for mu in (0.1, 1.0, 10.0):
        sol = solve_subproblem(P, [0.0], mu)
        np.testing.assert_allclose(sol.p, [0.0], atol=1e-12)
        assert sol.value == pytest.approx(objective(P, [0.0]), abs=1e-12)


def test_linear_on_interval_example():
    P = CompositeProblem(identity(1), Linear([1.0]), Box([0.0], [1.0]))
    sol = solve_subproblem(P, [0.5], 1.0)
    grid = np.linspace(0, 1, 100001)
    vals = grid + 0.5 * (grid - 0.5) ** 2
    assert sol.p[0] == pytest.approx(grid[np.argmin(vals)], abs=1e-5)
    assert sol.p[0] == 0.0
    assert sol.value == pytest.approx(0.125, abs=1e-12)


def test_criticality_examples():
    P = ridge_problem()
    assert criticality_measure(P, [2.0], 1.0) == pytest.approx(1.0, abs=1e-12)
    assert criticality_measure(P, [0.0], 1.0) <= 1e-9
    assert criticality_measure(registry.rosenbrock_ls(), [1.0, 1.0], 1.0) <= 1e-9


def test_mu_must_be_positive():
    with pytest.raises(ValueError):
        solve_subproblem(ridge_problem(), [1.0], 0.0)
    with pytest.raises(ValueError):
        InnerConfig(tolerance=0.0)
    with pytest.raises(ValueError):
        InnerConfig(max_inner_iterations=0)


def test_operator_norm(rng):
    for _ in range(20):
        J = rng.standard_normal((int(rng.integers(1, 6)), int(rng.integers(1, 6))))
        assert operator_norm(J) == pytest.approx(np.linalg.norm(J, 2), rel=1e-6)
    assert operator_norm(np.zeros((3, 2))) == 0.0


def test_budget_error_carries_best_iterate():
    P = registry.l1_exp_fit()
    x = np.array([1.5, -0.5])
    with pytest.raises(InnerBudgetError) as info:
        solve_subproblem(P, x, 0.5, InnerConfig(tolerance=1e-12, max_inner_iterations=5))
    err = info.value
    assert err.iterations == 5
    assert P.D.contains(err.p)
    assert err.residual > 1e-12


def test_warm_start_reaches_same_point():
    P = registry.minimax_quad()
    x = np.array([1.0, -0.5])
    cold = solve_subproblem(P, x, 1.0)
    warm = solve_subproblem(P, x + 1e-3, 1.0, warm_start=(cold.p, cold.dual))
    ref = solve_subproblem(P, x + 1e-3, 1.0)
    np.testing.assert_allclose(warm.p, ref.p, atol=1e-8)
    primal_only = solve_subproblem(P, x + 1e-3, 1.0, warm_start=(cold.p, None))
    np.testing.assert_allclose(primal_only.p, ref.p, atol=1e-8)


@pytest.mark.parametrize("name", registry.benchmark_names())
def test_solution_invariants(name):
    entry = registry.get(name)
    P = entry.build()
    cfg = InnerConfig()
    rng = np.random.default_rng(4)
    for x in sample_points(*entry.sample_box, 12, seed=9, D=P.D):
        prev = -np.inf
        fx = objective(P, x)
        for mu in (0.1, 1.0, 10.0):
            sol = solve_subproblem(P, x, mu, cfg)
            assert sol.residual <= cfg.tolerance
            assert P.D.contains(sol.p, 1e-10)
            d2 = float((sol.p - x) @ (sol.p - x))
            recomputed = model_h(P, x, sol.p) + 0.5 * mu * d2
            assert sol.value == pytest.approx(recomputed, abs=1e-12 * (1 + abs(recomputed)))
            slack = 10 * cfg.tolerance
            assert sol.value <= fx - 0.5 * mu * d2 + slack
            assert sol.value >= prev - slack
            prev = sol.value
            for _ in range(5):
                y = P.D.project(x + rng.standard_normal(P.n))
                assert sol.value <= model_h(P, x, y) + 0.5 * mu * float((x - y) @ (x - y)) + slack


@pytest.mark.parametrize("name", ["rosenbrock-ls", "minimax-quad", "ball-constrained-ls"])
def test_continuity_of_iteration_mapping(name):
    # local Lipschitz-like behaviour along shrinking perturbations
    entry = registry.get(name)
    P = entry.build()
    rng = np.random.default_rng(3)
    for x in sample_points(*entry.sample_box, 5, seed=11, D=P.D):
        p = solve_subproblem(P, x, 1.0).p
        d = rng.standard_normal(P.n)
        for r in (1e-2, 1e-4, 1e-6):
            xr = P.D.project(x + r * d / np.linalg.norm(d))
            pr = solve_subproblem(P, xr, 1.0).p
            assert np.linalg.norm(pr - p) <= 1e3 * np.linalg.norm(xr - x) + 1e-8


def test_brute_force_agreement_sample():
    rng = np.random.default_rng(77)
    for _ in range(30):
        g, D, Fx, J, x, mu = random_instance(rng)
        sol = solve_subproblem(affine_problem(Fx, J, x, g, D), x, mu)
        p, v = brute_force_subproblem(g, D, Fx, J, x, mu)
        assert np.linalg.norm(sol.p - p) <= 1e-6
        assert abs(sol.value - v) <= 1e-8


def test_methods_reported():
    assert solve_subproblem(ridge_problem(), [2.0], 1.0).method == "closed-form"
    P = CompositeProblem(identity(1), L1Norm(1), Box([0.0], [1.0]))
    sol = solve_subproblem(P, [0.7], 1.0)
    assert sol.method == "primal-dual"
    np.testing.assert_allclose(sol.p, [0.0], atol=1e-9)
