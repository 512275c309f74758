"""Iteration mapping and value function of the prox-linear subproblem.

For a point ``x`` and ``mu > 0`` the subproblem is::

    p_mu(x) = argmin_{y in D}  g(F(x) + J(x)(y - x)) + mu/2 ||y - x||^2
    V_mu(x) = the optimal value

It is solved by accelerated proximal gradient on the dual (FISTA with
adaptive restart), using the conjugate prox of ``g`` and the projection onto
``D``; the primal point is recovered from the dual in closed form. The
``mu``-strong convexity of the primal makes the dual smooth and sets the
step ``mu / ||J||^2``. Linear ``g``, and quadratic ``g`` on an unconstrained
domain, are solved in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .convex import HalfSquaredL2, Linear, Rn
from .problem import Array, CompositeProblem, as_point

_CHECK_EVERY = 10


@dataclass(frozen=True)
class InnerConfig:
    tolerance: float = 1e-10
    max_inner_iterations: int = 100_000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("inner tolerance must be positive")
        if self.max_inner_iterations < 1:
            raise ValueError("max_inner_iterations must be at least 1")


@dataclass(frozen=True)
class SubproblemSolution:
    """Approximate ``(p_mu(x), V_mu(x))`` with its certificate.

    ``dual`` is the final multiplier estimate, an element of ``dg`` at the
    linearized point up to the residual; it doubles as a warm start.
    """

    p: Array
    value: float
    inner_iterations: int
    residual: float
    mu: float
    dual: Array
    method: str = "primal-dual"


class InnerBudgetError(RuntimeError):
    """Inner iteration budget exhausted before the residual met the tolerance."""

    def __init__(self, message, p, residual, iterations, dual=None):
        super().__init__(message)
        self.p = p
        self.residual = residual
        self.iterations = iterations
        self.dual = dual


def operator_norm(J: Array, iterations: int = 50, tol: float = 1e-10) -> float:
    """Estimate the spectral norm of ``J`` by power iteration on ``J^T J``."""
    J = np.asarray(J, dtype=np.float64)
    n = J.shape[1]
    u = 1.0 + 0.1 * np.arange(n) / max(n, 1)
    u /= np.linalg.norm(u)
    est = 0.0
    converged = False
    for _ in range(iterations):
        w = J.T @ (J @ u)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        u = w / nw
        new = np.sqrt(nw)
        if abs(new - est) <= tol * new:
            est = new
            converged = True
            break
        est = new
    if not converged:
        # slow convergence: fall back to the Frobenius norm, an upper bound
        return float(np.linalg.norm(J))
    return float(est)


def _value(g, Fx, J, x, mu, y):
    d = y - x
    return float(g.value(Fx + J @ d)) + 0.5 * mu * float(d @ d)


def solve_subproblem(problem: CompositeProblem, x, mu: float,
                     cfg: Optional[InnerConfig] = None, *,
                     warm_start: Optional[tuple] = None,
                     Fx: Optional[Array] = None, J: Optional[Array] = None) -> SubproblemSolution:
    """Compute ``p_mu(x)`` and ``V_mu(x)`` to the residual tolerance in ``cfg``.

    ``warm_start`` is an optional ``(y, w)`` pair (primal point, dual
    multiplier), typically the previous solution's ``(p, dual)``. ``Fx`` and
    ``J`` may be passed to avoid re-evaluating the oracles.

    The residual is the length of one exact primal-dual step taken from the
    returned pair at the base step sizes: primal movement plus dual movement
    mapped into primal units by ``tau * ||J||``, divided by ``1 + ||x||``.
    It vanishes exactly at the subproblem's saddle points.
    """
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    cfg = cfg or InnerConfig()
    x = as_point(x, problem.n)
    g, D = problem.g, problem.D
    Fx = problem.F.eval(x) if Fx is None else Fx
    J = problem.F.jac(x) if J is None else J
    b = Fx - J @ x  # g is evaluated at J y + b
    scale = 1.0 + np.linalg.norm(x)
    # power iteration underestimates ||J||; keep tau*sigma*||J||^2 safely below 1
    L = 1.01 * operator_norm(J)

    if isinstance(g, Linear):
        p = D.project(x - (J.T @ g.c) / mu)
        return SubproblemSolution(p, _value(g, Fx, J, x, mu, p), 0, 0.0, mu,
                                  g.c.copy(), "closed-form")
    if L == 0.0:
        p = D.project(x)
        return SubproblemSolution(p, _value(g, Fx, J, x, mu, p), 0, 0.0, mu,
                                  g.subgradient(Fx), "closed-form")

    tau0 = sigma0 = 1.0 / L

    def certificate(y, w):
        # one exact primal-dual step at the base step sizes
        w2 = g.prox_conjugate(w + sigma0 * (J @ y + b), sigma0)
        y2 = D.project((y - tau0 * (J.T @ w2) + (tau0 * mu) * x) / (1.0 + tau0 * mu))
        return (np.linalg.norm(y2 - y) + tau0 * L * np.linalg.norm(w2 - w)) / scale

    if isinstance(g, HalfSquaredL2) and isinstance(D, Rn):
        # ridge system (J^T J + mu I) d = -J^T F(x)
        d = np.linalg.solve(J.T @ J + mu * np.eye(problem.n), -(J.T @ Fx))
        p = x + d
        w = Fx + J @ d
        return SubproblemSolution(p, _value(g, Fx, J, x, mu, p), 0, float(certificate(p, w)),
                                  mu, w, "closed-form")

    def primal(w):
        return D.project(x - (J.T @ w) / mu)

    if warm_start is not None and warm_start[1] is not None:
        w = np.array(warm_start[1], dtype=np.float64)
    elif warm_start is not None:
        y0 = D.project(as_point(warm_start[0], problem.n, "warm start"))
        w = g.subgradient(J @ y0 + b)
    else:
        w = g.subgradient(J @ D.project(x) + b)

    # Accelerated forward-backward on the dual, with the primal point
    # recovered as y(w) = P_D(x - J^T w / mu). The dual gradient is
    # ||J||^2/mu Lipschitz, which fixes the step.
    s = mu / L ** 2
    y = primal(w)
    res = certificate(y, w)
    best = (res, y, w)
    z, t = w, 1.0
    it = 0
    while res > cfg.tolerance:
        if it >= cfg.max_inner_iterations:
            _, by, bw = best
            raise InnerBudgetError(
                f"inner solver stopped after {it} iterations with residual {best[0]:.3e}",
                by, best[0], it, bw)
        w_new = g.prox_conjugate(z + s * (J @ primal(z) + b), s)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if (z - w_new) @ (w_new - w) > 0:
            # gradient-based adaptive restart
            z, t_new = w_new, 1.0
        else:
            z = w_new + ((t - 1.0) / t_new) * (w_new - w)
        w, t = w_new, t_new
        it += 1
        if it % _CHECK_EVERY == 0:
            y = primal(w)
            res = certificate(y, w)
            if res < best[0]:
                best = (res, y, w)
    return SubproblemSolution(y, _value(g, Fx, J, x, mu, y), it, float(res), mu, w)


def criticality_measure(problem: CompositeProblem, x, mu: float,
                        cfg: Optional[InnerConfig] = None) -> float:
    """``||x - p_mu(x)||``; zero exactly at critical points."""
    x = as_point(x, problem.n)
    sol = solve_subproblem(problem, x, mu, cfg)
    return float(np.linalg.norm(x - sol.p))
