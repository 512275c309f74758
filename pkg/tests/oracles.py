"""Independent reference solutions used by the tests.

The brute-force subproblem solver shares nothing with the library's inner
solver except the value oracle of ``g`` and the projection onto ``D``: it
minimizes the exactly penalized objective

    y -> g(b + J y) + mu/2 ||y - x||^2 + K dist(y, D)

by a dense grid (to size ``K``) followed by nested golden-section search,
which is exact for convex functions of one or two variables.
"""

import numpy as np

from compgn import CompositeProblem, SmoothMap
from compgn.convex import (Ball, Box, CoordinateMax, Halfspace, HalfSquaredL2, Huber, L1Norm,
                           L2Norm, Linear, LinfNorm, Rn, Simplex)

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0
_EPS = np.finfo(np.float64).eps


def golden_min(f, a, b, max_iterations=120):
    """Minimize a convex function of one variable on ``[a, b]``, shrinking the
    bracket down to floating-point resolution."""
    c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iterations):
        if b - a <= 4.0 * _EPS * max(abs(a), abs(b), 1e-300):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    t = 0.5 * (a + b)
    return t, f(t)


def sublevel_center(f, a, b, t, ft, bisections=36):
    """Midpoint of ``{s in [a, b] : f(s) <= ft + delta}`` around a near-minimizer ``t``.

    Rounding makes ``f`` flat to within about ``eps |f|`` near its
    minimizer, which limits the accuracy of any comparison-based search;
    the center of a slightly larger sublevel interval is insensitive to it.
    """
    level = ft + 1e-12 * (1.0 + abs(ft))

    def edge(direction, bound):
        # bracket the edge by expanding steps, then bisect
        inside, step = t, 1e-7 * (b - a)
        while True:
            outside = t + direction * step
            if direction * (outside - bound) >= 0:
                if f(bound) <= level:
                    return bound
                outside = bound
                break
            if f(outside) > level:
                break
            inside, step = outside, 4.0 * step
        for _ in range(bisections):
            mid = 0.5 * (inside + outside)
            if f(mid) <= level:
                inside = mid
            else:
                outside = mid
        return inside

    return 0.5 * (edge(-1.0, a) + edge(1.0, b))


def affine_problem(Fx, J, x, g, D):
    """Composite problem whose smooth map is the affine ``Fx + J (y - x)``."""
    Fx, J, x = (np.asarray(a, dtype=np.float64) for a in (Fx, J, x))
    m, n = J.shape
    F = SmoothMap(n, m, lambda y: Fx + J @ (y - x), lambda y: J,
                  hess_vec=lambda y, v, d: np.zeros(n))
    return CompositeProblem(F, g, D)


def brute_force_subproblem(g, D, Fx, J, x, mu, grid=21):
    """Reference ``(p, V)`` for ``min_{y in D} g(Fx + J (y - x)) + mu/2 ||y - x||^2``."""
    Fx, J, x = (np.asarray(a, dtype=np.float64) for a in (Fx, J, x))
    n = x.size
    if n > 2:
        raise ValueError("brute force is limited to n <= 2")
    phi = lambda y: g.value(Fx + J @ (y - x)) + 0.5 * mu * float((y - x) @ (y - x))

    # strong convexity bounds the distance from a feasible y0 to the minimizer:
    # mu/2 ||y0 - p||^2 <= phi(y0) - min phi, and min phi is at least the
    # minimum of the linear minorant of g plus the quadratic
    y0 = D.project(x)
    v0 = g.subgradient(Fx + J @ (y0 - x))
    c = J.T @ v0
    lower = g.value(Fx + J @ (y0 - x)) + float(c @ (x - y0)) - float(c @ c) / (2.0 * mu)
    radius = np.sqrt(2.0 * max(phi(y0) - lower, 0.0) / mu) * 1.05 + 1e-9

    axes = [np.linspace(y0[j] - radius, y0[j] + radius, grid) for j in range(n)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    # penalty above the Lipschitz constant of phi on the search box
    gmax = max(np.linalg.norm(g.subgradient(Fx + J @ (y - x))) for y in pts)
    K = 10.0 * (1.0 + np.linalg.norm(J, 2) * gmax + mu * (radius + np.linalg.norm(y0 - x)))
    pen = lambda y: phi(y) + K * np.linalg.norm(y - D.project(y))

    lo, hi = y0 - radius, y0 + radius
    if n == 1:
        f1 = lambda s: pen(np.array([s]))
        t, ft = golden_min(f1, lo[0], hi[0])
        p = np.array([sublevel_center(f1, lo[0], hi[0], t, ft)])
    else:
        def solve_inner(s):
            f2 = lambda u: pen(np.array([s, u]))
            u, fu = golden_min(f2, lo[1], hi[1])
            return u, fu, f2

        outer = lambda s: solve_inner(s)[1]
        s, fs = golden_min(outer, lo[0], hi[0])
        s = sublevel_center(outer, lo[0], hi[0], s, fs)
        u, fu, f2 = solve_inner(s)
        p = np.array([s, sublevel_center(f2, lo[1], hi[1], u, fu)])
    p = D.project(p)
    return p, phi(p)


def random_outer(rng, m):
    kind = rng.choice(["half-squared-l2", "l1", "l2", "linf", "max", "huber", "linear"])
    if kind == "half-squared-l2":
        return HalfSquaredL2(m)
    if kind == "l1":
        return L1Norm(m)
    if kind == "l2":
        return L2Norm(m)
    if kind == "linf":
        return LinfNorm(m)
    if kind == "max":
        return CoordinateMax(m)
    if kind == "huber":
        return Huber(m, delta=float(rng.uniform(0.2, 2.0)))
    return Linear(rng.standard_normal(m))


def random_set(rng, n):
    kind = rng.choice(["rn", "box", "ball", "simplex", "halfspace"])
    if kind == "rn":
        return Rn(n)
    if kind == "box":
        lo = rng.uniform(-1.5, 0.0, n)
        return Box(lo, lo + rng.uniform(0.2, 2.0, n))
    if kind == "ball":
        return Ball(rng.uniform(-0.5, 0.5, n), float(rng.uniform(0.3, 1.5)))
    if kind == "simplex":
        return Simplex(n, float(rng.uniform(0.5, 2.0)))
    return Halfspace(rng.standard_normal(n), float(rng.uniform(-0.5, 0.5)))


def random_instance(rng):
    """A random small subproblem ``(g, D, Fx, J, x, mu)`` with ``n <= 2``, ``m <= 3``."""
    n = int(rng.integers(1, 3))
    m = int(rng.integers(1, 4))
    g = random_outer(rng, m)
    D = random_set(rng, n)
    x = D.project(rng.uniform(-1.5, 1.5, n))
    Fx = rng.uniform(-2.0, 2.0, m)
    J = rng.uniform(-2.0, 2.0, (m, n))
    mu = float(rng.choice([0.1, 1.0, 10.0]))
    return g, D, Fx, J, x, mu
