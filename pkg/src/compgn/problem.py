"""Oracle contracts for composite problems ``min_{x in D} g(F(x))``.

``F`` is a smooth vector map, ``g`` a finite convex function and ``D`` a
closed convex set. The three pieces are bundled into a
:class:`CompositeProblem`, which is the object every solver and diagnostic
routine consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

Array = np.ndarray


class DimensionError(ValueError):
    """Raised when a point or oracle does not have the expected shape."""


def as_point(x, n: int, name: str = "x") -> Array:
    """Return ``x`` as a float64 vector of length ``n`` or raise."""
    if type(x) is np.ndarray and x.dtype == np.float64 and x.shape == (n,):
        return x
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise DimensionError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr


@dataclass(frozen=True)
class SmoothMap:
    """A C^2 map ``F: R^n -> R^m`` given by its oracles.

    ``hess_vec(x, v, d)`` returns ``(sum_i v_i Hess f_i(x)) d``. It is
    optional; diagnostics fall back to finite differences of the
    Jacobian-transpose product when it is missing.
    """

    n: int
    m: int
    value: Callable[[Array], Array]
    jacobian: Callable[[Array], Array]
    hess_vec: Optional[Callable[[Array, Array, Array], Array]] = None

    def __post_init__(self):
        if self.n <= 0 or self.m <= 0:
            raise DimensionError("dimensions of a SmoothMap must be positive")

    def __call__(self, x: Array) -> Array:
        return self.eval(x)

    def eval(self, x: Array) -> Array:
        x = as_point(x, self.n)
        return np.asarray(self.value(x), dtype=np.float64).reshape(self.m)

    def jac(self, x: Array) -> Array:
        x = as_point(x, self.n)
        return np.asarray(self.jacobian(x), dtype=np.float64).reshape(self.m, self.n)

    def hvp(self, x: Array, v: Array, d: Array, step: Optional[float] = None) -> Array:
        """Weighted Hessian-vector product, finite differences if no oracle."""
        x = as_point(x, self.n)
        v = as_point(v, self.m, "v")
        d = as_point(d, self.n, "d")
        if self.hess_vec is not None:
            return np.asarray(self.hess_vec(x, v, d), dtype=np.float64).reshape(self.n)
        # d/dx [J(x)^T v] applied to d, by central differences along d.
        nd = np.linalg.norm(d)
        if nd == 0.0:
            return np.zeros(self.n)
        h = step if step is not None else 1e-5 * (1.0 + np.linalg.norm(x))
        u = d / nd
        plus = self.jac(x + h * u).T @ v
        minus = self.jac(x - h * u).T @ v
        return (plus - minus) / (2.0 * h) * nd


class OuterConvex:
    """Finite convex ``g: R^m -> R`` with value, subgradient and prox oracles.

    Subclasses implement ``value``, ``subgradient`` and ``prox``.
    ``prox_conjugate`` (the prox of the convex conjugate ``g*``) defaults to
    the Moreau decomposition; the builtin variants override it with closed
    forms.
    """

    m: int

    def value(self, z: Array) -> float:
        raise NotImplementedError

    def subgradient(self, z: Array) -> Array:
        raise NotImplementedError

    def prox(self, z: Array, t: float) -> Array:
        raise NotImplementedError

    def prox_conjugate(self, z: Array, t: float) -> Array:
        _check_step(t)
        z = np.asarray(z, dtype=np.float64)
        return z - t * self.prox(z / t, 1.0 / t)

    def __call__(self, z: Array) -> float:
        return self.value(z)


class FeasibleSet:
    """Closed convex ``D`` in ``R^n`` given by projection and membership."""

    n: int

    def project(self, x: Array) -> Array:
        raise NotImplementedError

    def contains(self, x: Array, tol: float = 1e-10) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.linalg.norm(self.project(x) - x) <= tol * (1.0 + np.linalg.norm(x)))


def _check_step(t: float) -> None:
    if not t > 0:
        raise ValueError(f"prox step must be positive, got {t}")


@dataclass(frozen=True)
class CompositeProblem:
    """``min_{x in D} g(F(x))``."""

    F: SmoothMap
    g: OuterConvex
    D: FeasibleSet

    def __post_init__(self):
        if self.F.m != self.g.m:
            raise DimensionError(f"F maps into R^{self.F.m} but g is defined on R^{self.g.m}")
        if self.F.n != self.D.n:
            raise DimensionError(f"F is defined on R^{self.F.n} but D lives in R^{self.D.n}")

    @property
    def n(self) -> int:
        return self.F.n

    @property
    def m(self) -> int:
        return self.F.m


def objective(problem: CompositeProblem, x) -> float:
    """Return ``g(F(x))``. Feasibility of ``x`` is not checked."""
    x = as_point(x, problem.n)
    return float(problem.g.value(problem.F.eval(x)))


def linearized_inner(problem: CompositeProblem, x, y, Fx: Optional[Array] = None,
                     Jx: Optional[Array] = None) -> Array:
    """``F(x) + J(x)(y - x)``, the argument of ``g`` in the partial linearization."""
    x = as_point(x, problem.n)
    y = as_point(y, problem.n, "y")
    Fx = problem.F.eval(x) if Fx is None else Fx
    Jx = problem.F.jac(x) if Jx is None else Jx
    return Fx + Jx @ (y - x)


def model_h(problem: CompositeProblem, x, y) -> float:
    """Partial linearization ``h(x, y) = g(F(x) + J(x)(y - x))``; convex in ``y``."""
    return float(problem.g.value(linearized_inner(problem, x, y)))
