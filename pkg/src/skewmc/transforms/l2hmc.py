"""L2HMC-style composite transforms on ``R^{2d}``.

``Psi = G_K o ... o G_1`` with ``G_i = H_i o F_i o H_{i-1/2}``. The momentum
half-steps are

    H_{j,x}(p) = p * exp(d R_j(x)) + d * (grad log pi0(x) * exp(d R_j(x)) + M_j(x))

and the position coupling ``F_i`` updates ``x = (x1, x2)`` given ``p``:

    x1' = x1 * exp(d R1(x2, p)) + d M1(x2, p)
    x2' = x2 * exp(d R2(x1', p)) + d M2(x1', p)

where ``d`` is the step scale ``delta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .coupling import default_splits
from .diffeo import Diffeo, _check_finite
from .maps import SmoothMap, random_tanh_map


@dataclass(frozen=True)
class MomentumHalfStep:
    R: Callable = field(repr=False)   # x -> R^d
    M: Callable = field(repr=False)   # x -> R^d


@dataclass(frozen=True)
class PositionCoupling:
    idx1: np.ndarray
    idx2: np.ndarray
    R1: Callable = field(repr=False)  # (x2, p) -> R^{d1}
    M1: Callable = field(repr=False)
    R2: Callable = field(repr=False)  # (x1', p) -> R^{d2}
    M2: Callable = field(repr=False)


@dataclass(frozen=True)
class L2hmcBlock:
    first_half: MomentumHalfStep
    position: PositionCoupling
    second_half: MomentumHalfStep


@dataclass(frozen=True)
class L2hmcSpec:
    dim: int
    delta: float
    blocks: Sequence[L2hmcBlock] = field(repr=False)
    gradient: Callable = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.gradient is None:
            raise ValueError("L2HMC blocks need the target gradient")

    @property
    def K(self) -> int:
        return len(self.blocks)


def _kick(spec, half: MomentumHalfStep, x, p):
    d = spec.delta
    scale = d * half.R(x)
    e = np.exp(scale)
    p_new = p * e + d * (spec.gradient(x) * e + half.M(x))
    return p_new, np.sum(scale, axis=-1)


def _unkick(spec, half: MomentumHalfStep, x, p_new):
    """Inverse half-step and the log-Jacobian of the inverse."""
    d = spec.delta
    scale = d * half.R(x)
    p = (p_new - d * (spec.gradient(x) * np.exp(scale) + half.M(x))) * np.exp(-scale)
    return p, -np.sum(scale, axis=-1)


def _drift(spec, pos: PositionCoupling, x, p):
    d = spec.delta
    x = x.copy()
    x1, x2 = x[..., pos.idx1], x[..., pos.idx2]
    r1 = d * pos.R1(x2, p)
    x1 = x1 * np.exp(r1) + d * pos.M1(x2, p)
    r2 = d * pos.R2(x1, p)
    x2 = x2 * np.exp(r2) + d * pos.M2(x1, p)
    x[..., pos.idx1] = x1
    x[..., pos.idx2] = x2
    return x, np.sum(r1, axis=-1) + np.sum(r2, axis=-1)


def _undrift(spec, pos: PositionCoupling, x, p):
    d = spec.delta
    x = x.copy()
    x1, x2 = x[..., pos.idx1], x[..., pos.idx2]
    r2 = d * pos.R2(x1, p)
    x2 = (x2 - d * pos.M2(x1, p)) * np.exp(-r2)
    r1 = d * pos.R1(x2, p)
    x1 = (x1 - d * pos.M1(x2, p)) * np.exp(-r1)
    x[..., pos.idx1] = x1
    x[..., pos.idx2] = x2
    return x, -(np.sum(r1, axis=-1) + np.sum(r2, axis=-1))


def l2hmc_forward(spec: L2hmcSpec, x, p):
    """``Psi(x, p)`` and ``log J_Psi(x, p)``."""
    x = np.array(x, dtype=float)
    p = np.array(p, dtype=float)
    log_jac = np.zeros(np.broadcast_shapes(x.shape, p.shape)[:-1])
    for blk in spec.blocks:
        p, lj = _kick(spec, blk.first_half, x, p)
        log_jac = log_jac + lj
        x, lj = _drift(spec, blk.position, x, p)
        log_jac = log_jac + lj
        p, lj = _kick(spec, blk.second_half, x, p)
        log_jac = log_jac + lj
    _check_finite(x, p, log_jac)
    return x, p, log_jac


def l2hmc_inverse(spec: L2hmcSpec, x, p, with_log_jac: bool = False):
    """``Psi^{-1}(x, p)``, undoing each block analytically in reverse order.

    With ``with_log_jac`` also returns ``log J_{Psi^{-1}}(x, p)``.
    """
    x = np.array(x, dtype=float)
    p = np.array(p, dtype=float)
    log_jac = np.zeros(np.broadcast_shapes(x.shape, p.shape)[:-1])
    for blk in reversed(spec.blocks):
        p, lj2 = _unkick(spec, blk.second_half, x, p)
        x, lj1 = _undrift(spec, blk.position, x, p)
        p, lj0 = _unkick(spec, blk.first_half, x, p)
        log_jac = log_jac + lj0 + lj1 + lj2
    _check_finite(x, p)
    return (x, p, log_jac) if with_log_jac else (x, p)


def l2hmc_diffeo(spec: L2hmcSpec) -> Diffeo:
    """``Psi`` as a :class:`Diffeo` on concatenated ``(x, p)``."""
    d = spec.dim

    def forward(z):
        z = np.asarray(z, dtype=float)
        x, p, _ = l2hmc_forward(spec, z[..., :d], z[..., d:])
        return np.concatenate([x, p], axis=-1)

    def inverse(z):
        z = np.asarray(z, dtype=float)
        x, p = l2hmc_inverse(spec, z[..., :d], z[..., d:])
        return np.concatenate([x, p], axis=-1)

    def log_jac(z):
        z = np.asarray(z, dtype=float)
        return l2hmc_forward(spec, z[..., :d], z[..., d:])[2]

    def forward_lj(z):
        z = np.asarray(z, dtype=float)
        x, p, lj = l2hmc_forward(spec, z[..., :d], z[..., d:])
        return np.concatenate([x, p], axis=-1), lj

    def inverse_lj(z):
        z = np.asarray(z, dtype=float)
        x, p, lj = l2hmc_inverse(spec, z[..., :d], z[..., d:], with_log_jac=True)
        return np.concatenate([x, p], axis=-1), lj

    return Diffeo(2 * d, forward, inverse, log_jac, name="l2hmc",
                  forward_with_log_jac=forward_lj, inverse_with_log_jac=inverse_lj)


# -- constructors -------------------------------------------------------------

def _select_momentum(n_other: int, dim: int, idx, factor: float) -> np.ndarray:
    """Matrix picking ``factor * p[idx]`` out of the concatenation ``(other, p)``."""
    A = np.zeros((len(idx), n_other + dim))
    A[np.arange(len(idx)), n_other + np.asarray(idx, dtype=int)] = factor
    return A


def _position_drift_maps(dim, idx1, idx2, drift):
    d1, d2 = len(idx1), len(idx2)
    if drift == 0.0:
        return SmoothMap.zero(d2 + dim, d1), SmoothMap.zero(d1 + dim, d2)
    return (SmoothMap.linear(_select_momentum(d2, dim, idx1, drift)),
            SmoothMap.linear(_select_momentum(d1, dim, idx2, drift)))


def zero_l2hmc_spec(target, K: int, delta: float) -> L2hmcSpec:
    """All nets identically zero: each block kicks twice and leaves ``x`` fixed."""
    return _linear_spec(target, K, delta, drift=0.0)


def leapfrog_l2hmc_spec(target, K: int, h: float) -> L2hmcSpec:
    """Blocks that reproduce ``K`` classical leapfrog steps of size ``h``.

    Scale nets are zero and ``delta = h/2``, so each momentum half-step is the
    half-kick ``p + (h/2) grad log pi0(x)``. The position shift nets return
    ``2 p`` on each split, giving the drift ``x + h p``.
    """
    return _linear_spec(target, K, h / 2.0, drift=2.0)


def _linear_spec(target, K, delta, drift):
    dim = target.dim
    blocks = []
    for idx1, idx2 in default_splits(dim, K):
        d1, d2 = len(idx1), len(idx2)
        zero_h = MomentumHalfStep(SmoothMap.zero(dim, dim), SmoothMap.zero(dim, dim))
        M1, M2 = _position_drift_maps(dim, idx1, idx2, drift)
        pos = PositionCoupling(idx1, idx2, SmoothMap.zero(d2 + dim, d1), M1,
                               SmoothMap.zero(d1 + dim, d2), M2)
        blocks.append(L2hmcBlock(zero_h, pos, zero_h))
    return L2hmcSpec(dim, delta, blocks, target.grad)


def random_l2hmc_spec(target, K: int = 2, delta: float = 0.1, seed: int = 0,
                      scale: float = 0.2) -> L2hmcSpec:
    """Leapfrog-like blocks perturbed by random bounded ``tanh`` nets."""
    rng = np.random.default_rng(seed)
    dim = target.dim

    def half():
        return MomentumHalfStep(random_tanh_map(rng, dim, dim, scale=scale),
                                random_tanh_map(rng, dim, dim, scale=scale))

    blocks = []
    for idx1, idx2 in default_splits(dim, K):
        d1, d2 = len(idx1), len(idx2)
        pos = PositionCoupling(
            idx1, idx2,
            random_tanh_map(rng, d2 + dim, d1, scale=scale),
            random_tanh_map(rng, d2 + dim, d1, scale=scale,
                            A=_select_momentum(d2, dim, idx1, 2.0)),
            random_tanh_map(rng, d1 + dim, d2, scale=scale),
            random_tanh_map(rng, d1 + dim, d2, scale=scale,
                            A=_select_momentum(d1, dim, idx2, 2.0)),
        )
        blocks.append(L2hmcBlock(half(), pos, half()))
    return L2hmcSpec(dim, delta, blocks, target.grad)
