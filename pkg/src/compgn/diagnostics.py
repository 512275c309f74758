"""Numerical certificates for the structural properties of the method.

Each check compares an analytic formula (chain rule, partial derivatives of
the partial linearization, gradient of the value function) with central
finite differences, or verifies an inequality on sampled points, and
returns a :class:`CheckReport`. Points where ``g`` is not differentiable at
the relevant argument are detected by a randomized probe and skipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .driver import RunOutcome, SolverConfig, backtracking_step
from .problem import Array, CompositeProblem, as_point, linearized_inner, model_h, objective
from .subproblem import InnerBudgetError, InnerConfig, solve_subproblem

PROBE_COUNT = 8
PROBE_RADIUS = 1e-7
PROBE_AGREEMENT = 1e-9
# subgradients of a smooth g move by about lip * radius under a probe;
# allow that for gradient Lipschitz constants up to this value
PROBE_SMOOTH_LIPSCHITZ = 100.0

# tighter than the solver default: FD quotients divide value errors by h
FD_INNER = InnerConfig(tolerance=1e-13)


@dataclass
class CheckReport:
    name: str
    max_violation: float
    tolerance: float
    samples: int
    skipped: int = 0
    deviations: Array = field(default_factory=lambda: np.zeros(0), repr=False)
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.max_violation <= self.tolerance)

    def fraction_within(self) -> float:
        if self.deviations.size == 0:
            return 1.0
        return float(np.mean(self.deviations <= self.tolerance))

    @classmethod
    def from_deviations(cls, name, deviations, tolerance, skipped=0, note="") -> "CheckReport":
        dev = np.asarray(deviations, dtype=np.float64).reshape(-1)
        # NaN never passes
        worst = float(np.max(np.where(np.isnan(dev), np.inf, dev))) if dev.size else 0.0
        return cls(name, worst, float(tolerance), int(dev.size), int(skipped), dev, note)


def sample_points(lower, upper, n_samples: int, seed: int = 0, D=None) -> Array:
    """Uniform samples in a box, optionally projected onto ``D``."""
    rng = np.random.default_rng(seed)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    pts = rng.uniform(lower, upper, size=(n_samples, lower.size))
    if D is not None:
        pts = np.array([D.project(p) for p in pts]).reshape(n_samples, lower.size)
    return pts


def fd_gradient(f: Callable[[Array], float], x: Array, h: Optional[float] = None) -> Array:
    """Central finite-difference gradient with step ``1e-6 (1 + ||x||)``."""
    x = np.asarray(x, dtype=np.float64)
    h = 1e-6 * (1.0 + np.linalg.norm(x)) if h is None else h
    grad = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        grad[j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return grad


def relative_deviation(analytic: Array, reference: Array) -> float:
    return float(np.linalg.norm(analytic - reference) / max(1.0, np.linalg.norm(reference)))


def is_differentiable_at(g, z: Array, rng: np.random.Generator) -> bool:
    """Randomized probe: do subgradients near ``z`` agree with the one at ``z``?"""
    z = np.asarray(z, dtype=np.float64)
    v0 = g.subgradient(z)
    allowed = PROBE_AGREEMENT + PROBE_SMOOTH_LIPSCHITZ * PROBE_RADIUS
    for _ in range(PROBE_COUNT):
        d = rng.standard_normal(z.size)
        d *= PROBE_RADIUS / np.linalg.norm(d)
        if np.linalg.norm(g.subgradient(z + d) - v0) > allowed:
            return False
    return True


def _as_rows(points, n):
    pts = np.asarray(points, dtype=np.float64)
    return pts.reshape(1, n) if pts.ndim == 1 else pts.reshape(-1, n)


# ----------------------------------------------------------- chain rule ---


def chain_rule_check(problem: CompositeProblem, points, seed: int = 0,
                     tolerance: float = 1e-5) -> CheckReport:
    """Compare ``J(x)^T v``, ``v`` the oracle subgradient at ``F(x)``, with the
    finite-difference gradient of ``g(F(.))`` at each point.

    ``points`` is one point or an array with one point per row.
    """
    rng = np.random.default_rng(seed)
    f = lambda u: objective(problem, u)
    devs, skipped = [], 0
    for x in _as_rows(points, problem.n):
        z = problem.F.eval(x)
        if not is_differentiable_at(problem.g, z, rng):
            skipped += 1
            continue
        analytic = problem.F.jac(x).T @ problem.g.subgradient(z)
        devs.append(relative_deviation(analytic, fd_gradient(f, x)))
    return CheckReport.from_deviations("chain_rule", devs, tolerance, skipped)


def h_partials(problem: CompositeProblem, x, y, v: Optional[Array] = None):
    """Analytic partial (sub)gradients of ``h`` in ``y`` and ``x``."""
    x = as_point(x, problem.n)
    y = as_point(y, problem.n, "y")
    J = problem.F.jac(x)
    if v is None:
        v = problem.g.subgradient(linearized_inner(problem, x, y, Jx=J))
    return J.T @ v, problem.F.hvp(x, v, y - x)


def h_partial_checks(problem: CompositeProblem, x, y, seed: int = 0,
                     tolerance: float = 1e-5) -> CheckReport:
    """Finite-difference check of both partial derivative formulas of ``h``.

    ``x`` and ``y`` are single points or arrays of paired rows. The
    deviation per pair is the larger of the two relative deviations.
    """
    rng = np.random.default_rng(seed)
    xs, ys = _as_rows(x, problem.n), _as_rows(y, problem.n)
    if xs.shape != ys.shape:
        raise ValueError("x and y must hold the same number of points")
    devs, skipped = [], 0
    for xi, yi in zip(xs, ys):
        z = linearized_inner(problem, xi, yi)
        if not is_differentiable_at(problem.g, z, rng):
            skipped += 1
            continue
        gy, gx = h_partials(problem, xi, yi)
        fd_y = fd_gradient(lambda u: model_h(problem, xi, u), yi)
        fd_x = fd_gradient(lambda u: model_h(problem, u, yi), xi)
        devs.append(max(relative_deviation(gy, fd_y), relative_deviation(gx, fd_x)))
    return CheckReport.from_deviations("h_partials", devs, tolerance, skipped)


# ------------------------------------------------------- value function ---


def value_function_gradient(problem: CompositeProblem, x, mu: float,
                            cfg: Optional[InnerConfig] = None, *,
                            multiplier: str = "oracle", solution=None) -> Array:
    """``(sum_i v_i Hess f_i(x))(p - x) + mu (x - p)`` with ``p = p_mu(x)``.

    ``v`` comes from the subgradient oracle at ``F(x) + J(x)(p - x)``
    (``multiplier="oracle"``) or is the inner solver's dual estimate
    (``multiplier="dual"``), which is the element of the subdifferential
    that certifies optimality of ``p``.
    """
    x = as_point(x, problem.n)
    sol = solution if solution is not None else solve_subproblem(problem, x, mu, cfg)
    if multiplier == "oracle":
        v = problem.g.subgradient(linearized_inner(problem, x, sol.p))
    elif multiplier == "dual":
        v = sol.dual
    else:
        raise ValueError(f"unknown multiplier source {multiplier!r}")
    return problem.F.hvp(x, v, sol.p - x) + mu * (x - sol.p)


def value_function(problem: CompositeProblem, x, mu: float, cfg: Optional[InnerConfig] = None,
                   warm_start: Optional[tuple] = None) -> float:
    return solve_subproblem(problem, x, mu, cfg, warm_start=warm_start).value


def value_gradient_check(problem: CompositeProblem, points, mu: float = 1.0, seed: int = 0,
                         tolerance: float = 1e-4, cfg: InnerConfig = FD_INNER) -> List[CheckReport]:
    """FD agreement of :func:`value_function_gradient`, and the ratio
    ``||grad V|| / ((1 + mu) ||x - p||)`` as an empirical bound constant.

    Returns three reports: ``value_gradient`` (oracle multiplier, points
    that fail the differentiability probe skipped), ``value_gradient_dual``
    (the solver's multiplier, every point) and ``value_gradient_bound``
    (passes when every ratio is finite). Points whose subproblems cannot be
    solved to ``cfg`` within budget are skipped by all three.
    """
    rng = np.random.default_rng(seed)
    devs, dual_devs, ratios = [], [], []
    skipped = unresolved = 0
    for x in _as_rows(points, problem.n):
        try:
            sol = solve_subproblem(problem, x, mu, cfg)
            warm = (sol.p, sol.dual)
            fd = fd_gradient(lambda u: value_function(problem, u, mu, cfg, warm), x)
        except InnerBudgetError:
            unresolved += 1
            continue
        dual_grad = value_function_gradient(problem, x, mu, multiplier="dual", solution=sol)
        dual_devs.append(relative_deviation(dual_grad, fd))
        z = linearized_inner(problem, x, sol.p)
        if not is_differentiable_at(problem.g, z, rng):
            skipped += 1
            continue
        grad = value_function_gradient(problem, x, mu, solution=sol)
        devs.append(relative_deviation(grad, fd))
        gap = np.linalg.norm(x - sol.p)
        if gap > 0:
            ratios.append(np.linalg.norm(grad) / ((1.0 + mu) * gap))
    return [CheckReport.from_deviations("value_gradient", devs, tolerance, skipped + unresolved),
            CheckReport.from_deviations("value_gradient_dual", dual_devs, tolerance, unresolved),
            CheckReport.from_deviations("value_gradient_bound", ratios, np.inf, skipped + unresolved)]


def value_function_inequalities(problem: CompositeProblem, points,
                                mus: Sequence[float] = (0.1, 1.0, 10.0),
                                cfg: Optional[InnerConfig] = None, seed: int = 0,
                                tolerance: float = 1e-7, n_probes: int = 4) -> List[CheckReport]:
    """Value-function properties at feasible points.

    * ``value_identity``: ``V = h(x, p) + mu/2 ||p - x||^2`` recomputed from ``p``;
    * ``value_descent``: ``V <= g(F(x)) - mu/2 ||p - x||^2``;
    * ``value_monotone``: ``V`` nondecreasing in ``mu``;
    * ``value_minimality``: ``V <= h(x, y) + mu/2 ||x - y||^2`` at random feasible ``y``.
    """
    rng = np.random.default_rng(seed)
    mus = sorted(mus)
    ident, descent, mono, minimal = [], [], [], []
    for x in _as_rows(points, problem.n):
        fx = objective(problem, x)
        prev = None
        for mu in mus:
            sol = solve_subproblem(problem, x, mu, cfg)
            d2 = float((sol.p - x) @ (sol.p - x))
            recomputed = model_h(problem, x, sol.p) + 0.5 * mu * d2
            ident.append(abs(sol.value - recomputed) / (1.0 + abs(recomputed)))
            descent.append(sol.value - (fx - 0.5 * mu * d2))
            if prev is not None:
                mono.append(prev - sol.value)
            prev = sol.value
            for _ in range(n_probes):
                y = problem.D.project(x + rng.standard_normal(problem.n))
                minimal.append(sol.value - (model_h(problem, x, y) + 0.5 * mu * float((x - y) @ (x - y))))
    return [CheckReport.from_deviations("value_identity", ident, 1e-12),
            CheckReport.from_deviations("value_descent", descent, tolerance),
            CheckReport.from_deviations("value_monotone", mono, tolerance),
            CheckReport.from_deviations("value_minimality", minimal, tolerance)]


# -------------------------------------------------------- run-level checks ---


def solve_value_at(problem: CompositeProblem, x, mu: float, y) -> float:
    """Subproblem objective ``h(x, y) + mu/2 ||y - x||^2`` at a feasible ``y``."""
    d = np.asarray(y) - np.asarray(x)
    return model_h(problem, x, y) + 0.5 * mu * float(d @ d)


def descent_chain(problem: CompositeProblem, outcome: RunOutcome, max_iterations: int = 50,
                  cfg: InnerConfig = FD_INNER) -> Array:
    """Per-iteration slacks of the two-sided descent chain

        V_{mu_k}(x_k) + mu_k/2 ||x_{k+1} - x_k||^2 <= g(F(x_k)) <= V_{mu_{k-1}}(x_{k-1}).

    ``V`` is recomputed with a fresh subproblem solve. Returns an array of
    shape ``(K, 2)``: left and right violations (positive means violated);
    the right entry of the first row is NaN.
    """
    trace = outcome.trace[:max_iterations]
    xs = [r.x for r in trace]
    xs.append(outcome.trace[len(trace)].x if len(trace) < len(outcome.trace) else outcome.final_x)
    out = np.full((len(trace), 2), np.nan)
    prev_v = None
    for k, rec in enumerate(trace):
        try:
            v = solve_subproblem(problem, rec.x, rec.mu_k, cfg).value
        except InnerBudgetError as err:
            # the best iterate's objective, an upper bound on V
            v = solve_value_at(problem, rec.x, rec.mu_k, err.p)
        step = np.linalg.norm(xs[k + 1] - rec.x)
        fx = objective(problem, rec.x)
        out[k, 0] = v + 0.5 * rec.mu_k * step ** 2 - fx
        if prev_v is not None:
            out[k, 1] = fx - prev_v
        prev_v = v
    return out


def descent_chain_check(problem: CompositeProblem, outcome: RunOutcome, max_iterations: int = 50,
                        tolerance: float = 1e-7) -> CheckReport:
    chain = descent_chain(problem, outcome, max_iterations)
    devs = chain[~np.isnan(chain)]
    return CheckReport.from_deviations("descent_chain", devs, tolerance)


def step_acceptance_violations(problem: CompositeProblem, outcome: RunOutcome) -> Array:
    """``g(F(x_{k+1})) - [h(x_k, x_{k+1}) + mu_k/2 ||x_{k+1} - x_k||^2]`` per iteration."""
    xs = [r.x for r in outcome.trace] + [outcome.final_x]
    out = np.empty(len(outcome.trace))
    for k, rec in enumerate(outcome.trace):
        y = xs[k + 1]
        rhs = model_h(problem, rec.x, y) + 0.5 * rec.mu_k * float((y - rec.x) @ (y - rec.x))
        out[k] = objective(problem, y) - rhs
    return out


@dataclass
class MuBarResult:
    mu_bar: Optional[float]
    failures: dict
    samples: int

    @property
    def found(self) -> bool:
        return self.mu_bar is not None


def mu_bar_probe(problem: CompositeProblem, region, mu_grid: Sequence[float],
                 cfg: Optional[InnerConfig] = None, n_samples: int = 20, seed: int = 0,
                 include_center: bool = True) -> MuBarResult:
    """Smallest grid ``mu`` for which the majorization test holds at every
    sampled point of the box ``region = (lower, upper)``.

    The samples are the box center (if ``include_center``) and ``n_samples``
    uniform draws. With no samples the answer is vacuously ``mu_grid[0]``.
    """
    grid = list(mu_grid)
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("mu_grid must be nonempty and strictly increasing")
    cfg = cfg or InnerConfig()
    lower, upper = (np.asarray(r, dtype=np.float64) for r in region)
    pts = [0.5 * (lower + upper)] if include_center else []
    if n_samples > 0:
        pts.extend(sample_points(lower, upper, n_samples, seed))
    failures = {}
    for mu in grid:
        bad = 0
        for x in pts:
            sol = solve_subproblem(problem, x, mu, cfg)
            if objective(problem, sol.p) > sol.value + 10 * cfg.tolerance * (1.0 + abs(sol.value)):
                bad += 1
        failures[mu] = bad
        if bad == 0:
            return MuBarResult(mu, failures, len(pts))
    return MuBarResult(None, failures, len(pts))


def mu_tail(problem: CompositeProblem, outcome: RunOutcome, config: Optional[SolverConfig] = None,
            window: int = 10) -> List[float]:
    """Accepted ``mu_k`` over the last ``window`` iterations of the scheme.

    A run stopped by the step tolerance is continued from its final iterate
    (as the unstopped iteration would) until ``window`` further accepted
    values are available, so short runs are judged on the same tail length.
    """
    mus = [r.mu_k for r in outcome.trace]
    if len(mus) >= window:
        return mus[-window:]
    config = config or SolverConfig()
    x = outcome.final_x
    tail = list(mus)
    while len(tail) < len(mus) + window:
        res = backtracking_step(problem, x, config, inner_tolerance=1e-13)
        tail.append(res.mu)
        x = res.x_next
    return tail[-window:]
