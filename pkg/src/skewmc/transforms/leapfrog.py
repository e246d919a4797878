"""Generalised leapfrog (NICE) integrator.

One step ``F_i`` with drift maps ``M_i``, ``N_i`` and step size ``h``::

    p_half = p + h M_i(x)
    x'     = x + h p_half
    p'     = p_half + h N_i(x')

Each step has unit Jacobian. When ``N_{m+1-i} = M_i`` for all ``i`` the
composite ``Phi = F_m o ... o F_1`` satisfies ``Phi^{-1} = s o Phi o s`` with
``s`` the momentum flip.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .diffeo import Diffeo, _check_finite
from .maps import ScaledGradient, SmoothMap, map_lipschitz, random_tanh_map

DriftMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LeapfrogSpec:
    """Step count ``m``, step size ``h`` and drift maps ``M_1..M_m``, ``N_1..N_m``.

    ``lipschitz_L`` is a user-declared common Lipschitz constant of all drift
    maps. It is what certifies the step-size bound; see
    :func:`skewmc.transforms.step_bound_ok`.
    """

    m: int
    h: float
    M: Sequence[DriftMap] = field(repr=False)
    N: Sequence[DriftMap] = field(repr=False)
    lipschitz_L: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "M", tuple(self.M))
        object.__setattr__(self, "N", tuple(self.N))
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if not self.h > 0:
            raise ValueError("step size h must be positive")
        if len(self.M) != self.m or len(self.N) != self.m:
            raise ValueError(f"need {self.m} M and N maps, got {len(self.M)}, {len(self.N)}")
        if self.lipschitz_L is not None and self.lipschitz_L < 0:
            raise ValueError("lipschitz_L must be nonnegative")

    @property
    def nice1_structural(self) -> bool:
        """True when ``N_{m+1-i}`` is literally the same object as ``M_i``."""
        return all(self.N[self.m - 1 - i] is self.M[i] for i in range(self.m))

    def certified(self) -> bool:
        from .nice_theory import step_bound_ok
        return self.lipschitz_L is not None and step_bound_ok(self.lipschitz_L, self.m, self.h)

    def with_step(self, h: float) -> "LeapfrogSpec":
        return LeapfrogSpec(self.m, h, self.M, self.N, self.lipschitz_L)


def nice1_violation(spec: LeapfrogSpec, n_points: int = 16, seed: int = 0,
                    scale: float = 2.0) -> float:
    """Largest ``|N_{m+1-i}(x) - M_i(x)|`` over random points; 0 when structural."""
    if spec.nice1_structural:
        return 0.0
    dim = getattr(spec.M[0], "in_dim", None)
    if dim is None:
        raise ValueError("cannot infer dimension; pass maps with an in_dim attribute")
    xs = scale * np.random.default_rng(seed).standard_normal((n_points, dim))
    worst = 0.0
    for i in range(spec.m):
        diff = np.asarray(spec.N[spec.m - 1 - i](xs)) - np.asarray(spec.M[i](xs))
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


def leapfrog_step(spec: LeapfrogSpec, i: int, x, p):
    """Apply step ``F_i`` (1-based) to ``(x, p)``; the log-Jacobian is 0."""
    if not 1 <= i <= spec.m:
        raise IndexError(f"block index {i} outside 1..{spec.m}")
    h = spec.h
    p_half = p + h * spec.M[i - 1](x)
    x_new = x + h * p_half
    p_new = p_half + h * spec.N[i - 1](x_new)
    _check_finite(x_new, p_new)
    return x_new, p_new


def leapfrog_inverse_step(spec: LeapfrogSpec, i: int, x, p):
    """Closed-form inverse of :func:`leapfrog_step`."""
    h = spec.h
    p_half = p - h * spec.N[i - 1](x)
    x_prev = x - h * p_half
    p_prev = p_half - h * spec.M[i - 1](x_prev)
    _check_finite(x_prev, p_prev)
    return x_prev, p_prev


def leapfrog_trajectory(spec: LeapfrogSpec, x, p):
    """All iterates ``[(x_1, p_1), ..., (x_{m+1}, p_{m+1})]``, starting at the input."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    out = [(x, p)]
    for i in range(1, spec.m + 1):
        x, p = leapfrog_step(spec, i, x, p)
        out.append((x, p))
    return out


def leapfrog_forward(spec: LeapfrogSpec, x, p):
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    for i in range(1, spec.m + 1):
        x, p = leapfrog_step(spec, i, x, p)
    return x, p


def leapfrog_inverse(spec: LeapfrogSpec, x, p):
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if spec.nice1_structural:
        y, q = leapfrog_forward(spec, x, -p)
        return y, -q
    for i in range(spec.m, 0, -1):
        x, p = leapfrog_inverse_step(spec, i, x, p)
    return x, p


def _split(z):
    z = np.asarray(z, dtype=float)
    d = z.shape[-1] // 2
    return z[..., :d], z[..., d:]


def leapfrog_compose(spec: LeapfrogSpec) -> Diffeo:
    """``Phi = F_m o ... o F_1`` as a volume-preserving map of ``R^{2d}``."""

    def forward(z):
        y, q = leapfrog_forward(spec, *_split(z))
        return np.concatenate([y, q], axis=-1)

    def inverse(z):
        y, q = leapfrog_inverse(spec, *_split(z))
        return np.concatenate([y, q], axis=-1)

    def log_jac(z):
        return np.zeros(np.shape(z)[:-1])

    in_dim = getattr(spec.M[0], "in_dim", None)
    dim = None if in_dim is None else 2 * in_dim
    return Diffeo(dim, forward, inverse, log_jac, name="leapfrog")


def theta_m(spec: LeapfrogSpec, x, p):
    """Weighted drift sum ``Theta_m`` with ``G_x(p) = x + m h p + h^2 Theta_m(x, p)``."""
    return theta_from_trajectory(spec, leapfrog_trajectory(spec, x, p))


def theta_from_trajectory(spec: LeapfrogSpec, traj):
    m = spec.m
    xs = [t[0] for t in traj]  # xs[k] is x_{k+1}
    total = np.zeros_like(xs[0])
    for i in range(1, m + 1):
        total = total + (m + 1 - i) * spec.M[i - 1](xs[i - 1])
    for i in range(1, m):
        total = total + (m - i) * spec.N[i - 1](xs[i])
    return total


def position_map(spec: LeapfrogSpec, x, p):
    """``G_x(p)``, the position component of ``Phi(x, p)``."""
    return leapfrog_forward(spec, x, p)[0]


def momentum_map(spec: LeapfrogSpec, x, p):
    """``H_x(p)``, the momentum component of ``Phi(x, p)``."""
    return leapfrog_forward(spec, x, p)[1]


# -- spec constructors ------------------------------------------------------

def nice_spec(m: int, h: float, M: Sequence[DriftMap], lipschitz_L: Optional[float] = None
              ) -> LeapfrogSpec:
    """Spec satisfying ``N_{m+1-i} = M_i`` by construction.

    If ``lipschitz_L`` is omitted it is taken from the maps' analytic bounds
    when every map carries one.
    """
    M = tuple(M)
    N = tuple(reversed(M))
    if lipschitz_L is None:
        bounds = [map_lipschitz(f) for f in M]
        if all(b is not None for b in bounds):
            lipschitz_L = max(bounds)
    return LeapfrogSpec(m, h, M, N, lipschitz_L)


def zero_spec(dim: int, m: int, h: float) -> LeapfrogSpec:
    zero = SmoothMap.zero(dim, dim)
    return nice_spec(m, h, [zero] * m, lipschitz_L=0.0)


def harmonic_spec(dim: int, m: int, h: float, stiffness: float = 0.5) -> LeapfrogSpec:
    """All drifts ``x -> -stiffness * x`` (half-gradient of a standard normal)."""
    f = SmoothMap.linear(-stiffness * np.eye(dim))
    return nice_spec(m, h, [f] * m, lipschitz_L=stiffness)


def hmc_spec(target, m: int, h: float, lipschitz_grad: Optional[float] = None) -> LeapfrogSpec:
    """Classical leapfrog: ``M_i = N_i = grad log pi0 / 2``."""
    g = ScaledGradient(target.grad, 0.5, lipschitz_grad)
    return nice_spec(m, h, [g] * m, lipschitz_L=g.lipschitz)


def random_nice_spec(dim: int, m: int, h: float, seed: int = 0, scale: float = 0.2,
                     base_stiffness: float = 0.0, weight_scale: float = 1.0) -> LeapfrogSpec:
    """Random bounded drifts ``-k x + scale * tanh(W x + b)`` with NICE1 by construction."""
    rng = np.random.default_rng(seed)
    A = -base_stiffness * np.eye(dim) if base_stiffness else None
    M = [random_tanh_map(rng, dim, dim, scale=scale, weight_scale=weight_scale, A=A)
         for _ in range(m)]
    return nice_spec(m, h, M)


def random_nonnice_spec(dim: int, m: int, h: float, seed: int = 0, scale: float = 0.5
                        ) -> LeapfrogSpec:
    """Independent random ``M_i`` and ``N_i``: violates NICE1 in general."""
    rng = np.random.default_rng(seed)
    M = [random_tanh_map(rng, dim, dim, scale=scale) for _ in range(m)]
    N = [random_tanh_map(rng, dim, dim, scale=scale) for _ in range(m)]
    L = max(f.lipschitz for f in M + N)
    return LeapfrogSpec(m, h, M, N, L)
