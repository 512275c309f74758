"""Backtracking composite Gauss-Newton outer loop.

Each outer iteration resets ``mu`` to ``mu0``, solves the prox-linear
subproblem, and multiplies ``mu`` by ``tau`` until the true objective at the
candidate is majorized by the model value::

    g(F(y)) <= g(F(x) + J(x)(y - x)) + mu/2 ||y - x||^2

The accepted candidate becomes the next iterate. Runs stop on a small step
(critical point), on a large iterate norm (divergence), or when a budget
runs out.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional

import numpy as np

from .problem import Array, CompositeProblem, as_point, objective
from .subproblem import (InnerBudgetError, InnerConfig, SubproblemSolution,
                         criticality_measure, solve_subproblem)

log = logging.getLogger(__name__)

CONVERGED = "converged-critical"
DIVERGING = "diverging-norm"
OUTER_BUDGET = "outer-budget-exhausted"
BACKTRACK_BUDGET = "backtrack-budget-exhausted"
INNER_FAILURE = "inner-failure"
STATUSES = (CONVERGED, DIVERGING, OUTER_BUDGET, BACKTRACK_BUDGET, INNER_FAILURE)

# smallest inner tolerance the adaptive policy will request
INNER_TOLERANCE_FLOOR = 1e-13


@dataclass(frozen=True)
class SolverConfig:
    mu0: float = 1.0
    tau: float = 2.0
    step_tolerance: float = 1e-8
    max_outer_iterations: int = 10_000
    divergence_norm_bound: float = 1e10
    max_backtracks_per_iteration: int = 60
    inner: InnerConfig = field(default_factory=InnerConfig)
    reset_mu_each_iteration: bool = True
    warm_start: bool = True

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError("mu0 must be positive")
        if not self.tau > 1:
            raise ValueError("tau must be greater than 1")
        if not (self.step_tolerance > 0 and self.divergence_norm_bound > 0):
            raise ValueError("tolerances must be positive")
        if self.max_outer_iterations < 1 or self.max_backtracks_per_iteration < 0:
            raise ValueError("iteration budgets must be nonnegative")

    def with_overrides(self, **kw) -> "SolverConfig":
        inner_kw = {k: kw.pop(k) for k in ("tolerance", "max_inner_iterations") if k in kw}
        cfg = replace(self, **kw)
        if inner_kw:
            cfg = replace(cfg, inner=replace(cfg.inner, **inner_kw))
        return cfg


@dataclass(frozen=True)
class IterateRecord:
    k: int
    x: Array
    objective: float
    mu_k: float
    step_norm: float
    backtracks: int
    inner_iterations: int
    criticality: float
    cumulative_step: float
    model_value: float = float("nan")  # V_{mu_k}(x_k)
    inner_tolerance: float = float("nan")


@dataclass
class RunOutcome:
    status: str
    final_x: Array
    trace: List[IterateRecord]
    final_objective: float = float("nan")
    final_criticality: float = float("nan")
    mu_final: float = float("nan")
    x0_projected: bool = False
    message: str = ""

    @property
    def iterations(self) -> int:
        return len(self.trace)


class BacktrackBudgetError(RuntimeError):
    def __init__(self, message, mu, solution):
        super().__init__(message)
        self.mu = mu
        self.solution = solution


class StepResult(NamedTuple):
    x_next: Array
    mu: float
    backtracks: int
    solution: SubproblemSolution
    inner_iterations: int


def _accepts(problem, y, sol, slack):
    lhs = objective(problem, y)
    rhs = sol.value  # h(x, y) + mu/2 ||y - x||^2
    return lhs <= rhs + slack * (1.0 + abs(rhs))


def backtracking_step(problem: CompositeProblem, x_k, config: Optional[SolverConfig] = None, *,
                      mu_start: Optional[float] = None, inner_tolerance: Optional[float] = None,
                      warm_start: Optional[tuple] = None) -> StepResult:
    """Steps 1 and 2 of one outer iteration from ``x_k``.

    ``mu`` starts at ``mu_start`` (``config.mu0`` by default) and is
    multiplied by ``config.tau`` while the majorization test fails. Equality
    within ``10 * inner_tolerance`` counts as acceptance.
    """
    config = config or SolverConfig()
    x_k = as_point(x_k, problem.n, "x_k")
    mu = config.mu0 if mu_start is None else float(mu_start)
    tol = config.inner.tolerance if inner_tolerance is None else inner_tolerance
    inner = replace(config.inner, tolerance=tol)
    slack = 10.0 * tol
    Fx = problem.F.eval(x_k)
    J = problem.F.jac(x_k)
    total_inner = 0
    warm = warm_start
    backtracks = 0
    while True:
        sol = solve_subproblem(problem, x_k, mu, inner, warm_start=warm, Fx=Fx, J=J)
        total_inner += sol.inner_iterations
        if _accepts(problem, sol.p, sol, slack):
            return StepResult(sol.p, mu, backtracks, sol, total_inner)
        if backtracks >= config.max_backtracks_per_iteration:
            raise BacktrackBudgetError(
                f"majorization still fails after {backtracks} increases of mu (mu={mu:.3e})",
                mu, sol)
        backtracks += 1
        mu *= config.tau
        if config.warm_start:
            warm = (sol.p, sol.dual)


def _inner_tolerance(config: SolverConfig, mu: float, prev_step: Optional[float]) -> float:
    base = config.inner.tolerance
    if prev_step is None:
        return base
    return min(base, max(1e-4 * mu * prev_step ** 2, INNER_TOLERANCE_FLOOR))


def run(problem: CompositeProblem, x0, config: Optional[SolverConfig] = None) -> RunOutcome:
    """Iterate the backtracking composite Gauss-Newton scheme from ``x0``."""
    config = config or SolverConfig()
    x = as_point(x0, problem.n, "x0").copy()
    projected = False
    if not problem.D.contains(x, 1e-10):
        log.warning("x0 is not in D; projecting it before iterating")
        x = problem.D.project(x)
        projected = True

    trace: List[IterateRecord] = []
    cumulative = 0.0
    mu_prev = None
    prev_step = None
    warm = None
    status = OUTER_BUDGET
    message = ""
    for k in range(config.max_outer_iterations):
        if config.reset_mu_each_iteration or mu_prev is None:
            mu_start = config.mu0
        else:
            # no reset: continue from the last accepted value
            mu_start = mu_prev
        tol = _inner_tolerance(config, mu_start, prev_step)
        try:
            res = backtracking_step(problem, x, config, mu_start=mu_start,
                                    inner_tolerance=tol, warm_start=warm)
        except InnerBudgetError as exc:
            status, message = INNER_FAILURE, str(exc)
            break
        except BacktrackBudgetError as exc:
            status, message = BACKTRACK_BUDGET, str(exc)
            break
        step = float(np.linalg.norm(res.x_next - x))
        cumulative += step
        trace.append(IterateRecord(
            k=k, x=x, objective=objective(problem, x), mu_k=res.mu, step_norm=step,
            backtracks=res.backtracks, inner_iterations=res.inner_iterations,
            criticality=step, cumulative_step=cumulative,
            model_value=res.solution.value, inner_tolerance=tol))
        x_next = res.x_next
        mu_prev = res.mu
        prev_step = step
        warm = (res.solution.p, res.solution.dual) if config.warm_start else None
        x = x_next
        if step <= config.step_tolerance:
            status = CONVERGED
            break
        if np.linalg.norm(x) >= config.divergence_norm_bound:
            status = DIVERGING
            break

    out = RunOutcome(status=status, final_x=x, trace=trace, x0_projected=projected,
                     message=message, mu_final=mu_prev if mu_prev is not None else config.mu0)
    out.final_objective = objective(problem, x)
    if status == CONVERGED:
        try:
            out.final_criticality = criticality_measure(problem, x, out.mu_final, config.inner)
        except InnerBudgetError:
            pass
    return out
