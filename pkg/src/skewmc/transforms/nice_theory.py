"""Step-size certification and inversion of ``G_x`` for generalised leapfrog maps.

With common Lipschitz constant ``L`` for the drift maps, ``G_x(p) =
x + m h p + h^2 Theta_m(x, p)`` is a diffeomorphism in ``p`` whenever
``h <= c0 / (sqrt(L) m)``, where ``c0`` solves ``exp(c vartheta1(c)) = 2``
with ``vartheta1(c) = 2 + c + c^2``. Under that bound the map
``p -> (y - x)/(m h) - (h/m) Theta_m(x, p)`` is a contraction whose fixed
point is ``G_x^{-1}(y)``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .leapfrog import LeapfrogSpec, leapfrog_trajectory, theta_from_trajectory


class StepBoundError(ValueError):
    """The contraction needed by the fixed-point inverse is not certified."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap."""


def vartheta1(s: float) -> float:
    return 2.0 + s + s * s


@lru_cache(maxsize=None)
def compute_c0(tol: float = 1e-12) -> float:
    """Unique root of ``c * vartheta1(c) = ln 2`` on ``[0, 1]``, by bisection."""
    target = math.log(2.0)
    lo, hi = 0.0, 1.0
    f = lambda c: c * vartheta1(c) - target  # noqa: E731
    if not (f(lo) < 0 < f(hi)):
        raise AssertionError("bisection bracket does not straddle the root")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def max_step_size(L: float, m: int) -> float:
    """Largest ``h`` certified by the bound (``inf`` when ``L = 0``)."""
    if L < 0 or m < 1:
        raise ValueError("need L >= 0 and m >= 1")
    if L == 0:
        return math.inf
    return compute_c0() / (math.sqrt(L) * m)


def step_bound_ok(L: float, m: int, h: float) -> bool:
    """True iff ``L = 0`` or ``h <= c0 / (sqrt(L) m)``."""
    if L < 0 or h < 0:
        raise ValueError("L and h must be nonnegative")
    if m < 1:
        raise ValueError("m must be at least 1")
    return L == 0 or h <= max_step_size(L, m)


def theta_bound(L: float, h: float, m: int) -> float:
    """Lipschitz bound of ``p -> Theta_m(x, p)``:
    ``(m/h) {(1 + h sqrt(L) vartheta1(h sqrt(L)))^m - 1}``.
    """
    if L < 0 or h < 0 or m < 1:
        raise ValueError("need L >= 0, h >= 0, m >= 1")
    if L == 0:
        return 0.0
    r = math.sqrt(L)
    if h == 0:
        return m * m * r * vartheta1(0.0)
    s = h * r
    return (m / h) * math.expm1(m * math.log1p(s * vartheta1(s)))


def contraction_constant(L: float, h: float, m: int) -> float:
    """``kappa = (h/m) theta_bound(L, h, m)``; below 1 inside the certified region."""
    return (h / m) * theta_bound(L, h, m)


def g_inverse_fixed_point(spec: LeapfrogSpec, x, y, tol: float = 1e-10,
                          max_iter: int = 200, full_output: bool = False):
    """Solve ``G_x(p) = y`` for ``p`` by Banach fixed-point iteration.

    Starts from ``p0 = (y - x) / (m h)``, the exact answer for zero drifts.
    Stops once ``|G_x(p) - y| <= tol`` (Euclidean norm, worst row for
    batched input).

    Raises:
        StepBoundError: the LeapfrogSpec's declared Lipschitz constant does not certify
            a contraction (or no constant is declared).
        ConvergenceError: ``max_iter`` iterations without reaching ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if spec.lipschitz_L is None or not step_bound_ok(spec.lipschitz_L, spec.m, spec.h):
        raise StepBoundError("step bound violated: contraction not certified")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m, h = spec.m, spec.h
    p0 = (y - x) / (m * h)
    p = p0
    residual = math.inf
    for it in range(1, max_iter + 1):
        traj = leapfrog_trajectory(spec, x, p)
        residual = float(np.max(np.linalg.norm(traj[-1][0] - y, axis=-1)))
        if residual <= tol:
            return (p, it - 1, residual) if full_output else p
        theta = theta_from_trajectory(spec, traj)
        p = p0 - (h / m) * theta
    traj = leapfrog_trajectory(spec, x, p)
    residual = float(np.max(np.linalg.norm(traj[-1][0] - y, axis=-1)))
    if residual <= tol:
        return (p, max_iter, residual) if full_output else p
    raise ConvergenceError(f"no convergence after {max_iter} iterations "
                           f"(residual {residual:.3e})")

