"""Sampled-point checks of map identities, Jacobians and acceptance rules."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from ..core import AcceptanceFunction, ExtendedState, MomentumDensity, TargetDensity
from ..targets import gaussian
from ..transforms.leapfrog import (LeapfrogSpec, leapfrog_forward, leapfrog_trajectory,
                                   nice1_violation)
from ..transforms.nice_theory import StepBoundError, g_inverse_fixed_point
from .report import Report


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], z, eps: Optional[float] = None
                ) -> np.ndarray:
    """Central-difference Jacobian; default step ``1e-5 (1 + |z|)``."""
    z = np.asarray(z, dtype=float)
    if eps is None:
        eps = 1e-5 * (1.0 + np.linalg.norm(z))
    if not eps > 0:
        raise ValueError("eps must be positive")
    d = z.shape[0]
    # evaluate all 2d perturbed points in one batched call
    pts = np.concatenate([z + eps * np.eye(d), z - eps * np.eye(d)])
    vals = np.asarray(f(pts), dtype=float)
    return ((vals[:d] - vals[d:]) / (2.0 * eps)).T


def fd_log_jacobian(f: Callable[[np.ndarray], np.ndarray], z, eps: Optional[float] = None
                    ) -> float:
    """``log |det Df(z)|`` from a central-difference Jacobian.

    The determinant goes through an LU factorisation with partial pivoting
    (``numpy.linalg.slogdet``), which tracks the sign separately and sums log
    magnitudes, so it does not overflow in moderate dimension.

    Raises:
        FloatingPointError: the Jacobian is numerically singular.
    """
    J = fd_jacobian(f, z, eps)
    sign, logdet = np.linalg.slogdet(J)
    if sign == 0 or not np.isfinite(logdet):
        raise FloatingPointError("numerically singular Jacobian")
    return float(logdet)


# -- core-level checks -------------------------------------------------------------

def check_acceptance_identity(fn: AcceptanceFunction, n: int = 10_000, seed: int = 0,
                              low: float = 1e-6, high: float = 1e6, tol: float = 1e-12) -> Report:
    """``t a(1/t) = a(t)`` (relative) at log-uniform ``t``, plus ``a(0) = 0`` and ``a <= 1``."""
    rng = np.random.default_rng(seed)
    t = np.exp(rng.uniform(np.log(low), np.log(high), n))
    lhs = t * fn.from_log(-np.log(t))
    rhs = fn.from_log(np.log(t))
    rel = float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))
    rep = Report(f"acceptance identity ({fn.kind})")
    rep.add("balance_identity", rel <= tol, rel, tol)
    a0 = float(fn.evaluate(0.0))
    rep.add("a_of_zero", a0 == 0.0, a0, 0.0)
    over = float(np.max(rhs) - 1.0)
    rep.add("bounded_by_one", over <= 0.0, max(over, 0.0), 0.0)
    return rep


def check_involution(s, states: Sequence[ExtendedState]) -> Report:
    """``s(s(z)) = z`` bit-exactly on the given states."""
    bad = [i for i, z in enumerate(states) if not s(s(z)).same_as(z)]
    rep = Report("involution")
    rep.add("self_inverse", not bad, float(len(bad)), 0.0,
            f"first failure at state {bad[0]}" if bad else "")
    return rep


def check_gradient(target: TargetDensity, n_points: int = 100, seed: int = 0,
                   rtol: float = 1e-4, spread: float = 2.0) -> Report:
    """Analytic gradient vs central differences with step ``1e-5 (1 + |x|)``.

    The error at each point is measured as ``|g - g_fd|_inf / (1 + |g|_inf)``.
    """
    rng = np.random.default_rng(seed)
    if target.sample is not None:
        xs = target.sample(n_points, rng)
    else:
        xs = spread * rng.standard_normal((n_points, target.dim))
    worst = 0.0
    for x in xs:
        g = target.grad(x)
        g_fd = fd_jacobian(lambda pts: target.log_prob(pts)[:, None], x)[0]
        err = float(np.max(np.abs(g - g_fd)) / (1.0 + np.max(np.abs(g))))
        worst = max(worst, err)
    rep = Report(f"gradient ({target.name})")
    rep.add("gradient_matches_fd", worst <= rtol, worst, rtol)
    return rep


def check_momentum_symmetry(phi: MomentumDensity, n: int = 1000, seed: int = 0,
                            tol: float = 1e-12) -> Report:
    rng = np.random.default_rng(seed)
    p = 3.0 * rng.standard_normal((n, phi.dim))
    gap = float(np.max(np.abs(phi.log_density(p) - phi.log_density(-p))))
    rep = Report("momentum symmetry")
    rep.add("log_phi_even", gap <= tol, gap, tol)
    return rep


# -- Lipschitz refutation --------------------------------------------------------------

def estimate_lipschitz(f, dim: int, low, high, n_pairs: int = 10_000, seed: int = 0) -> float:
    """Largest ``|f(u) - f(w)| / |u - w|`` over random pairs in the box ``[low, high]^dim``.

    This is a lower bound on the true constant, so it can only refute a
    declared value.
    """
    rng = np.random.default_rng(seed)
    u = rng.uniform(low, high, (n_pairs, dim))
    w = rng.uniform(low, high, (n_pairs, dim))
    num = np.linalg.norm(np.asarray(f(u)) - np.asarray(f(w)), axis=-1)
    den = np.linalg.norm(u - w, axis=-1)
    ok = den > 0
    return float(np.max(num[ok] / den[ok]))


def refutes_lipschitz(f, declared: float, dim: int, low=-3.0, high=3.0,
                      n_pairs: int = 10_000, seed: int = 0) -> bool:
    """True when sampled difference quotients exceed ``declared``."""
    return estimate_lipschitz(f, dim, low, high, n_pairs, seed) > declared * (1 + 1e-9)


# -- NICE identities ----------------------------------------------------------------

def check_nice1(spec: LeapfrogSpec, n_points: int = 16, seed: int = 0,
                tol: float = 1e-12) -> Report:
    """Pointwise ``N_{m+1-i} = M_i``."""
    gap = nice1_violation(spec, n_points, seed)
    rep = Report("reversed drift condition")
    rep.add("N_reversed_equals_M", gap <= tol, gap, tol)
    return rep


def closed_form_iterates(spec: LeapfrogSpec, traj):
    """Positions and momenta ``x_k, p_k`` rebuilt from the weighted drift sums.

    Uses the drift values along ``traj`` (the output of
    :func:`leapfrog_trajectory`) but none of its later iterates directly:

        x_k = x_1 + (k-1) h p_1 + h^2 sum_{i<k} (k-i) M_i(x_i)
                               + h^2 sum_{i<k-1} (k-1-i) N_i(x_{i+1})
        p_k = p_1 + h sum_{i<k} (M_i(x_i) + N_i(x_{i+1}))
    """
    h = spec.h
    xs = [t[0] for t in traj]
    x1, p1 = traj[0]
    Mv = [spec.M[i](xs[i]) for i in range(spec.m)]        # Mv[i-1] = M_i(x_i)
    Nv = [spec.N[i](xs[i + 1]) for i in range(spec.m)]    # Nv[i-1] = N_i(x_{i+1})
    out = []
    for k in range(1, spec.m + 2):
        xk = x1 + (k - 1) * h * p1
        pk = p1.copy()
        for i in range(1, k):
            xk = xk + h * h * (k - i) * Mv[i - 1]
            pk = pk + h * (Mv[i - 1] + Nv[i - 1])
        for i in range(1, k - 1):
            xk = xk + h * h * (k - 1 - i) * Nv[i - 1]
        out.append((xk, pk))
    return out


def check_nice_identities(spec: LeapfrogSpec, phi: MomentumDensity, n_samples: int = 20,
                          seed: int = 0, target: Optional[TargetDensity] = None,
                          spread: float = 1.5, fn: Optional[AcceptanceFunction] = None
                          ) -> Report:
    """Identities of a certified generalised leapfrog map at random ``(x, p)``.

    (a) ``Phi(y, -q) = (x, -p)`` for ``(y, q) = Phi(x, p)``, abs tol 1e-8.
    (b) the fixed-point solver recovers ``p`` from ``(x, y)``, abs tol 1e-8.
    (c) ``J_{G_y^{-1}}(x) = J_{G_x^{-1}}(y)`` from finite differences,
        relative tol 1e-3 on the determinants.
    (d) closed-form iterates match the recursion, abs tol 1e-10.
    (e) the position-space MH ratio, built from the proposal density with
        both inverses found by fixed-point iteration, equals the extended
        ratio ``a(pi0(y) phi(q) / (pi0(x) phi(p)))``, relative tol 1e-8.

    Raises:
        StepBoundError: the step bound is not certified for ``spec``.
    """
    if not spec.certified():
        raise StepBoundError("step bound violated: identities need a certified spec")
    rng = np.random.default_rng(seed)
    dim = phi.dim
    target = target or gaussian(dim)
    fn = fn or AcceptanceFunction("metropolis")
    worst = dict(a=0.0, b=0.0, c=0.0, d=0.0, e=0.0)
    for _ in range(n_samples):
        x = spread * rng.standard_normal(dim)
        p = phi.draw(rng)
        traj = leapfrog_trajectory(spec, x, p)
        y, q = traj[-1]
        xb, pb = leapfrog_forward(spec, y, -q)
        worst["a"] = max(worst["a"], float(np.max(np.abs(np.concatenate([xb - x, pb + p])))))
        p_hat = g_inverse_fixed_point(spec, x, y, tol=1e-12)
        worst["b"] = max(worst["b"], float(np.max(np.abs(p_hat - p))))
        # G_y^{-1}(x) = -q by (a); log J of an inverse is minus that of the map
        lj_xy = -fd_log_jacobian(lambda ps: leapfrog_forward(spec, np.broadcast_to(x, ps.shape), ps)[0], p)
        lj_yx = -fd_log_jacobian(lambda ps: leapfrog_forward(spec, np.broadcast_to(y, ps.shape), ps)[0], -q)
        worst["c"] = max(worst["c"], abs(np.expm1(lj_yx - lj_xy)))
        for (xk, pk), (xc, pc) in zip(traj, closed_form_iterates(spec, traj)):
            worst["d"] = max(worst["d"], float(np.max(np.abs(np.concatenate([xk - xc, pk - pc])))))
        back = g_inverse_fixed_point(spec, y, x, tol=1e-12)
        fwd = g_inverse_fixed_point(spec, x, y, tol=1e-12)
        lp_x, lp_y = target.log_prob(x), target.log_prob(y)
        a_density = fn.from_log(lp_y + phi.log_density(back) - lp_x - phi.log_density(fwd))
        a_extended = fn.from_log(lp_y + phi.log_density(q) - lp_x - phi.log_density(p))
        worst["e"] = max(worst["e"], abs(a_density - a_extended) / max(abs(a_extended), 1e-300))
    rep = Report("generalised leapfrog identities")
    for key, name, tol in (("a", "involution_identity", 1e-8),
                           ("b", "fixed_point_recovers_momentum", 1e-8),
                           ("c", "inverse_jacobian_symmetry", 1e-3),
                           ("d", "closed_form_iterates", 1e-10),
                           ("e", "position_ratio_matches_extended", 1e-8)):
        rep.add(name, worst[key] <= tol, worst[key], tol)
    return rep


def check_involution_identity(spec: LeapfrogSpec, n_samples: int = 100, seed: int = 0,
                              tol: float = 1e-8, spread: float = 1.5) -> Report:
    """Only check (a) of :func:`check_nice_identities`; needs no step bound."""
    dim = getattr(spec.M[0], "in_dim")
    rng = np.random.default_rng(seed)
    x = spread * rng.standard_normal((n_samples, dim))
    p = rng.standard_normal((n_samples, dim))
    y, q = leapfrog_forward(spec, x, p)
    xb, pb = leapfrog_forward(spec, y, -q)
    gap = float(np.max(np.abs(np.concatenate([xb - x, pb + p], axis=-1))))
    rep = Report("involution identity")
    rep.add("involution_identity", gap <= tol, gap, tol)
    return rep


def check_log_jacobian(forward, log_jac, points, rtol: float = 1e-4, name: str = "map"
                       ) -> Report:
    """Analytic log-Jacobian vs :func:`fd_log_jacobian` at each point.

    Error per point is ``|lj - lj_fd| / max(1, |lj_fd|)``: relative for
    large values and absolute near 0, where a relative error is undefined.
    """
    worst = 0.0
    for z in points:
        lj = float(np.asarray(log_jac(z[None]))[0])
        ref = fd_log_jacobian(forward, z)
        worst = max(worst, abs(lj - ref) / max(1.0, abs(ref)))
    rep = Report(f"log-jacobian ({name})")
    rep.add(f"{name}_log_jacobian_vs_fd", worst <= rtol, worst, rtol)
    return rep


def check_position_map_nonsingular(psi, dim: int, points, v: int = 1,
                                   floor: float = -30.0) -> Report:
    """Empirical local check that ``p -> proj_x Psi^v(x, p)`` is a diffeomorphism.

    At each ``(x, p)`` the finite-difference Jacobian in ``p`` must be
    nonsingular, with ``log |det|`` above ``floor``. This is only a local
    probe; global injectivity is not checked.
    """
    from ..transforms.diffeo import apply_signed_batch

    worst = np.inf
    for z in np.atleast_2d(np.asarray(points, dtype=float)):
        x = z[:dim]

        def pos(ps, x=x):
            w = np.concatenate([np.broadcast_to(x, ps.shape), ps], axis=-1)
            out, _ = apply_signed_batch(psi, np.full(ps.shape[0], v), w)
            return out[:, :dim]

        try:
            worst = min(worst, fd_log_jacobian(pos, z[dim:]))
        except FloatingPointError:
            worst = -np.inf
            break
    rep = Report("position map local diffeomorphism")
    rep.add(f"position_map_nonsingular_v{v:+d}", worst > floor, worst, floor)
    return rep
