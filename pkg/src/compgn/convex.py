"""Catalog of outer convex functions and feasible sets.

Every outer function comes with an exact proximal operator and a
deterministic subgradient selection: ``sign(0) = 0`` for the l1 norm, the
zero vector at the origin for the l2 and linf norms, and the first
maximizing index for the linf norm and the coordinate maximum.
"""

from __future__ import annotations

import numpy as np

from .problem import Array, FeasibleSet, OuterConvex, _check_step, as_point

_EPS = np.finfo(np.float64).eps


def project_simplex(x: Array, radius: float = 1.0) -> Array:
    """Euclidean projection onto ``{w >= 0, sum(w) = radius}``.

    Sorting algorithm; a stable sort breaks ties by index.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.all(x >= 0) and abs(x.sum() - radius) <= 4 * _EPS * max(radius, np.abs(x).sum()):
        return x.copy()
    order = np.argsort(-x, kind="stable")
    s = x[order]
    css = np.cumsum(s) - radius
    ks = np.arange(1, x.size + 1)
    cond = s - css / ks > 0
    rho = np.nonzero(cond)[0][-1]
    theta = css[rho] / (rho + 1.0)
    w = np.maximum(x - theta, 0.0)
    # cancellation in x - theta can leave the sum a few ulps of |theta| off;
    # absorb that in the largest entry so the result is a fixed point
    i = int(np.argmax(w))
    w[i] = max(w[i] - (w.sum() - radius), 0.0)
    return w


def project_l1_ball(x: Array, radius: float = 1.0) -> Array:
    x = np.asarray(x, dtype=np.float64)
    if np.abs(x).sum() <= radius:
        return x.copy()
    return np.sign(x) * project_simplex(np.abs(x), radius)


def project_l2_ball(x: Array, radius: float = 1.0) -> Array:
    x = np.asarray(x, dtype=np.float64)
    nrm = np.linalg.norm(x)
    if nrm <= radius * (1.0 + 4 * _EPS):
        return x.copy()
    return x * (radius / nrm)


# ---------------------------------------------------------------- outer g ---


class HalfSquaredL2(OuterConvex):
    """``g(z) = ||z||^2 / 2``."""

    name = "half-squared-l2"

    def __init__(self, m: int):
        self.m = int(m)

    def value(self, z):
        z = np.asarray(z, dtype=np.float64)
        return 0.5 * float(z @ z)

    def subgradient(self, z):
        return np.array(z, dtype=np.float64)

    def prox(self, z, t):
        _check_step(t)
        return np.asarray(z, dtype=np.float64) / (1.0 + t)

    def prox_conjugate(self, z, t):
        _check_step(t)
        return np.asarray(z, dtype=np.float64) / (1.0 + t)


class L1Norm(OuterConvex):
    name = "l1-norm"

    def __init__(self, m: int):
        self.m = int(m)

    def value(self, z):
        return float(np.abs(z).sum())

    def subgradient(self, z):
        return np.sign(np.asarray(z, dtype=np.float64))

    def prox(self, z, t):
        _check_step(t)
        z = np.asarray(z, dtype=np.float64)
        return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)

    def prox_conjugate(self, z, t):
        # g* is the indicator of the unit linf ball
        _check_step(t)
        return np.minimum(np.maximum(z, -1.0), 1.0)


class L2Norm(OuterConvex):
    name = "l2-norm"

    def __init__(self, m: int):
        self.m = int(m)

    def value(self, z):
        return float(np.linalg.norm(z))

    def subgradient(self, z):
        z = np.asarray(z, dtype=np.float64)
        nrm = np.linalg.norm(z)
        if nrm == 0.0:
            return np.zeros_like(z)
        return z / nrm

    def prox(self, z, t):
        _check_step(t)
        z = np.asarray(z, dtype=np.float64)
        nrm = np.linalg.norm(z)
        if nrm <= t:
            return np.zeros_like(z)
        return (1.0 - t / nrm) * z

    def prox_conjugate(self, z, t):
        _check_step(t)
        return project_l2_ball(z)


class LinfNorm(OuterConvex):
    name = "linf-norm"

    def __init__(self, m: int):
        self.m = int(m)

    def value(self, z):
        return float(np.max(np.abs(z)))

    def subgradient(self, z):
        z = np.asarray(z, dtype=np.float64)
        v = np.zeros_like(z)
        if not np.any(z):
            return v
        i = int(np.argmax(np.abs(z)))
        v[i] = np.sign(z[i])
        return v

    def prox(self, z, t):
        _check_step(t)
        z = np.asarray(z, dtype=np.float64)
        return z - project_l1_ball(z, t)

    def prox_conjugate(self, z, t):
        # g* is the indicator of the unit l1 ball
        _check_step(t)
        return project_l1_ball(z, 1.0)


class CoordinateMax(OuterConvex):
    """``g(z) = max_i z_i``."""

    name = "coordinate-max"

    def __init__(self, m: int):
        self.m = int(m)

    def value(self, z):
        return float(np.max(z))

    def subgradient(self, z):
        z = np.asarray(z, dtype=np.float64)
        v = np.zeros_like(z)
        v[int(np.argmax(z))] = 1.0
        return v

    def prox(self, z, t):
        _check_step(t)
        z = np.asarray(z, dtype=np.float64)
        return z - project_simplex(z, t)

    def prox_conjugate(self, z, t):
        # g* is the indicator of the unit simplex
        _check_step(t)
        return project_simplex(z, 1.0)


class Huber(OuterConvex):
    """Separable Huber loss, quadratic on ``[-delta, delta]`` with unit slope outside."""

    name = "huber"

    def __init__(self, m: int, delta: float = 1.0):
        if not delta > 0:
            raise ValueError("huber delta must be positive")
        self.m = int(m)
        self.delta = float(delta)

    def value(self, z):
        a = np.abs(np.asarray(z, dtype=np.float64))
        d = self.delta
        return float(np.where(a <= d, 0.5 * a * a / d, a - 0.5 * d).sum())

    def subgradient(self, z):
        return np.clip(np.asarray(z, dtype=np.float64) / self.delta, -1.0, 1.0)

    def prox(self, z, t):
        _check_step(t)
        z = np.asarray(z, dtype=np.float64)
        d = self.delta
        inner = np.abs(z) <= d + t
        return np.where(inner, z * (d / (d + t)), z - t * np.sign(z))

    def prox_conjugate(self, z, t):
        # g*(w) = delta/2 ||w||^2 + indicator(||w||_inf <= 1)
        _check_step(t)
        return np.clip(np.asarray(z, dtype=np.float64) / (1.0 + t * self.delta), -1.0, 1.0)


class Linear(OuterConvex):
    """``g(z) = <c, z>``."""

    name = "linear"

    def __init__(self, c):
        self.c = np.array(c, dtype=np.float64).reshape(-1)
        self.c.setflags(write=False)
        self.m = self.c.size

    def value(self, z):
        return float(self.c @ np.asarray(z, dtype=np.float64))

    def subgradient(self, z):
        return self.c.copy()

    def prox(self, z, t):
        _check_step(t)
        return np.asarray(z, dtype=np.float64) - t * self.c

    def prox_conjugate(self, z, t):
        _check_step(t)
        return self.c.copy()


OUTER_VARIANTS = {
    cls.name: cls
    for cls in (HalfSquaredL2, L1Norm, L2Norm, LinfNorm, CoordinateMax, Huber, Linear)
}


def make_outer(name: str, m: int, **params) -> OuterConvex:
    """Build an outer function by variant tag."""
    if name == "linear":
        c = params.get("c", np.ones(m))
        return Linear(c)
    if name == "huber":
        return Huber(m, params.get("delta", 1.0))
    try:
        return OUTER_VARIANTS[name](m)
    except KeyError:
        raise ValueError(f"unknown outer function {name!r}") from None


# ---------------------------------------------------------- feasible sets ---


class Rn(FeasibleSet):
    name = "all-of-Rn"

    def __init__(self, n: int):
        self.n = int(n)

    def project(self, x):
        return as_point(x, self.n).copy()

    def contains(self, x, tol=1e-10):
        return bool(np.all(np.isfinite(x)))


class Box(FeasibleSet):
    """``lower <= x <= upper``; infinite bounds are allowed."""

    name = "box"

    def __init__(self, lower, upper):
        lo = np.array(lower, dtype=np.float64).reshape(-1)
        hi = np.array(upper, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("box bounds must have equal shapes")
        if np.any(lo > hi):
            raise ValueError("box requires lower <= upper")
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lower, self.upper = lo, hi
        self.n = lo.size

    def project(self, x):
        return np.minimum(np.maximum(as_point(x, self.n), self.lower), self.upper)

    def contains(self, x, tol=1e-10):
        x = as_point(x, self.n)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


class Ball(FeasibleSet):
    name = "euclidean-ball"

    def __init__(self, center, radius: float):
        if not radius > 0:
            raise ValueError("ball radius must be positive")
        self.center = np.array(center, dtype=np.float64).reshape(-1)
        self.center.setflags(write=False)
        self.radius = float(radius)
        self.n = self.center.size

    def project(self, x):
        x = as_point(x, self.n)
        return self.center + project_l2_ball(x - self.center, self.radius)

    def contains(self, x, tol=1e-10):
        x = as_point(x, self.n)
        return bool(np.linalg.norm(x - self.center) <= self.radius + tol)


class Simplex(FeasibleSet):
    """``{x >= 0, sum(x) = radius}``."""

    name = "simplex"

    def __init__(self, n: int, radius: float = 1.0):
        if not radius > 0:
            raise ValueError("simplex radius must be positive")
        self.n = int(n)
        self.radius = float(radius)

    def project(self, x):
        return project_simplex(as_point(x, self.n), self.radius)

    def contains(self, x, tol=1e-10):
        x = as_point(x, self.n)
        return bool(np.all(x >= -tol) and abs(x.sum() - self.radius) <= tol * (1.0 + self.radius))


class Halfspace(FeasibleSet):
    """``{x : <a, x> <= b}``."""

    name = "halfspace"

    def __init__(self, a, b: float):
        self.a = np.array(a, dtype=np.float64).reshape(-1)
        if not np.any(self.a):
            raise ValueError("halfspace normal must be nonzero")
        self.a.setflags(write=False)
        self.b = float(b)
        self.n = self.a.size
        self._aa = float(self.a @ self.a)

    def project(self, x):
        x = as_point(x, self.n)
        gap = float(self.a @ x) - self.b
        if gap <= 4 * _EPS * (abs(self.b) + np.sqrt(self._aa) * np.linalg.norm(x)):
            return x.copy()
        return x - (gap / self._aa) * self.a

    def contains(self, x, tol=1e-10):
        x = as_point(x, self.n)
        return bool(self.a @ x - self.b <= tol * np.sqrt(self._aa))
