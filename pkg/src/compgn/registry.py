"""Named benchmark problems for the CLI, tests and diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .convex import Ball, Box, CoordinateMax, HalfSquaredL2, L1Norm, Linear, Rn
from .problem import CompositeProblem, SmoothMap

EXP_FIT_SEED = 20160418


@dataclass(frozen=True)
class RegistryEntry:
    name: str
    builder: Callable[..., CompositeProblem]
    x0: Tuple[float, ...]
    notes: str
    optimum: Optional[Tuple[float, ...]] = None
    optimum_value: Optional[float] = None
    # box used to sample probe points for diagnostics
    sample_box: Tuple[Tuple[float, ...], Tuple[float, ...]] = ((-1.0,), (1.0,))
    # SolverConfig overrides applied before user overrides
    solver_overrides: Dict[str, float] = field(default_factory=dict)
    fixture: bool = False

    def build(self, **params) -> CompositeProblem:
        return self.builder(**params)


def rosenbrock_map(a: float = 1.0, b: float = 10.0) -> SmoothMap:
    def value(x):
        return np.array([a - x[0], b * (x[1] - x[0] ** 2)])

    def jac(x):
        return np.array([[-1.0, 0.0], [-2.0 * b * x[0], b]])

    def hess_vec(x, v, d):
        return np.array([-2.0 * b * v[1] * d[0], 0.0])

    return SmoothMap(2, 2, value, jac, hess_vec)


def rosenbrock_ls() -> CompositeProblem:
    return CompositeProblem(rosenbrock_map(), HalfSquaredL2(2), Rn(2))


def exp_fit_data(seed: int = EXP_FIT_SEED, m: int = 20):
    """Samples of ``2 exp(-0.8 t)`` on [0, 2] with small Gaussian noise and
    three gross outliers (indices 3, 9, 15)."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 2.0, m)
    y = 2.0 * np.exp(-0.8 * t) + 0.02 * rng.standard_normal(m)
    for i, jump in ((3, 1.5), (9, -1.0), (15, 1.2)):
        if i < m:
            y[i] += jump
    return t, y


def exp_model_map(t, y) -> SmoothMap:
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)

    def value(x):
        return x[0] * np.exp(x[1] * t) - y

    def jac(x):
        e = np.exp(x[1] * t)
        return np.column_stack([e, x[0] * t * e])

    def hess_vec(x, v, d):
        e = np.exp(x[1] * t)
        h01 = float(v @ (t * e))
        h11 = float(v @ (x[0] * t * t * e))
        return np.array([h01 * d[1], h01 * d[0] + h11 * d[1]])

    return SmoothMap(2, t.size, value, jac, hess_vec)


def l1_exp_fit(seed: int = EXP_FIT_SEED, m: int = 20) -> CompositeProblem:
    t, y = exp_fit_data(seed, m)
    return CompositeProblem(exp_model_map(t, y), L1Norm(t.size),
                            Box([0.0, -5.0], [10.0, 5.0]))


# f_i(x) = 0.5 x^T A_i x + b_i^T x + c_i
_MINIMAX_A = np.array([[[2.0, 0.0], [0.0, 1.0]],
                       [[1.0, 0.5], [0.5, 3.0]],
                       [[4.0, -1.0], [-1.0, 2.0]]])
_MINIMAX_B = np.array([[-2.0, 1.0], [1.0, -3.0], [1.0, 2.0]])
_MINIMAX_C = np.array([0.0, 0.5, -1.0])


def quadratics_map(A, B, C) -> SmoothMap:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    m, n = B.shape

    def value(x):
        return 0.5 * np.einsum("i,kij,j->k", x, A, x) + B @ x + C

    def jac(x):
        return A @ x + B

    def hess_vec(x, v, d):
        return np.einsum("k,kij,j->i", v, A, d)

    return SmoothMap(n, m, value, jac, hess_vec)


def minimax_quad() -> CompositeProblem:
    return CompositeProblem(quadratics_map(_MINIMAX_A, _MINIMAX_B, _MINIMAX_C),
                            CoordinateMax(3), Rn(2))


def quartic_map(n: int) -> SmoothMap:
    return SmoothMap(n, n, lambda x: x ** 4, lambda x: np.diag(4.0 * x ** 3),
                     lambda x, v, d: 12.0 * x ** 2 * v * d)


def box_quartic(c=(1.0, -0.5)) -> CompositeProblem:
    c = np.asarray(c, dtype=np.float64)
    return CompositeProblem(quartic_map(c.size), Linear(c),
                            Box([0.5, -1.0][: c.size], [2.0, 1.5][: c.size]))


def himmelblau_map() -> SmoothMap:
    def value(x):
        return np.array([x[0] ** 2 + x[1] - 11.0, x[0] + x[1] ** 2 - 7.0])

    def jac(x):
        return np.array([[2.0 * x[0], 1.0], [1.0, 2.0 * x[1]]])

    def hess_vec(x, v, d):
        return np.array([2.0 * v[0] * d[0], 2.0 * v[1] * d[1]])

    return SmoothMap(2, 2, value, jac, hess_vec)


def ball_constrained_ls(radius: float = 2.0) -> CompositeProblem:
    return CompositeProblem(himmelblau_map(), HalfSquaredL2(2), Ball([0.0, 0.0], radius))


def linear_unbounded() -> CompositeProblem:
    identity = SmoothMap(1, 1, lambda x: x.copy(), lambda x: np.eye(1),
                         lambda x, v, d: np.zeros(1))
    return CompositeProblem(identity, Linear([1.0]), Rn(1))


REGISTRY: Dict[str, RegistryEntry] = {e.name: e for e in [
    RegistryEntry(
        "rosenbrock-ls", rosenbrock_ls, (-1.2, 1.0),
        "g = half-squared-l2, F = Rosenbrock residuals (1 - x1, 10 (x2 - x1^2)), D = R^2",
        optimum=(1.0, 1.0), optimum_value=0.0,
        sample_box=((-2.0, -1.0), (2.0, 3.0))),
    RegistryEntry(
        "l1-exp-fit", l1_exp_fit, (1.0, 0.0),
        "g = l1-norm, F = residuals of x1 exp(x2 t) against 20 samples of 2 exp(-0.8 t) "
        f"(noise sd 0.02, 3 outliers, numpy default_rng seed {EXP_FIT_SEED}), "
        "D = box [0, 10] x [-5, 5]",
        sample_box=((1.0, -1.5), (3.0, -0.2))),
    RegistryEntry(
        "minimax-quad", minimax_quad, (2.0, 2.0),
        "g = coordinate-max of three convex quadratics in R^2, D = R^2",
        sample_box=((-2.0, -2.0), (2.0, 2.0))),
    RegistryEntry(
        "box-quartic", box_quartic, (1.5, 0.5),
        "g = linear with c = (1, -0.5), F(x) = x^4 coordinatewise, D = box [0.5, 2] x [-1, 1.5]",
        optimum=(0.5, 1.5), optimum_value=0.5 ** 4 - 0.5 * 1.5 ** 4,
        sample_box=((0.5, -1.0), (2.0, 1.5))),
    RegistryEntry(
        "ball-constrained-ls", ball_constrained_ls, (0.0, 0.0),
        "g = half-squared-l2, F = Himmelblau residuals (x1^2 + x2 - 11, x1 + x2^2 - 7), "
        "D = euclidean ball of radius 2 at the origin",
        sample_box=((-2.0, -2.0), (2.0, 2.0))),
    RegistryEntry(
        "linear-unbounded", linear_unbounded, (0.0,),
        "fixture: g(z) = z, F = identity, D = R; unbounded below. Runs with mu0 = 1e-8 "
        "so the iterates cross the divergence bound within 100 iterations",
        sample_box=((-1.0,), (1.0,)), solver_overrides={"mu0": 1e-8}, fixture=True),
]}


def benchmark_names():
    """Registry problems that are not test fixtures."""
    return [name for name, e in REGISTRY.items() if not e.fixture]


def get(name: str) -> RegistryEntry:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(REGISTRY)}") from None
