"""Conditional affine coupling transforms and the MALA map.

A coupling block splits ``p`` into ``(p1, p2)`` and applies, given ``x``::

    p1' = p1 * exp(R1(p2, x)) + M1(p2, x)
    p2' = p2 * exp(R2(p1', x)) + M2(p1', x)

with log-Jacobian ``sum R1(p2, x) + sum R2(p1', x)``. Blocks invert in closed
form, in reverse order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .diffeo import ConditionalDiffeo, _check_finite
from .maps import SmoothMap, random_tanh_map

CouplingNet = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CouplingBlock:
    idx1: np.ndarray
    idx2: np.ndarray
    R1: CouplingNet = field(repr=False)
    M1: CouplingNet = field(repr=False)
    R2: CouplingNet = field(repr=False)
    M2: CouplingNet = field(repr=False)


@dataclass(frozen=True)
class CouplingSpec:
    dim: int
    blocks: Sequence[CouplingBlock] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        for b in self.blocks:
            idx = np.concatenate([b.idx1, b.idx2])
            if sorted(idx.tolist()) != list(range(self.dim)):
                raise ValueError("block split must partition the coordinates")

    @property
    def K(self) -> int:
        return len(self.blocks)


def default_splits(dim: int, K: int):
    """Index pairs with ``d1 = ceil(d/2)``, alternating halves between blocks.

    For ``d = 1`` every block is ``([0], [])`` and its second half is a no-op.
    """
    d1 = (dim + 1) // 2
    first, second = np.arange(d1), np.arange(d1, dim)
    out = []
    for i in range(K):
        if i % 2 == 0 or dim == 1:
            out.append((first, second))
        else:
            # swap roles: the last ceil(d/2) coordinates are transformed first
            out.append((np.arange(dim - d1, dim), np.arange(dim - d1)))
    return out


def coupling_forward(spec: CouplingSpec, x, p):
    """``G_x(p)`` and its log-Jacobian."""
    x = np.asarray(x, dtype=float)
    p = np.array(p, dtype=float, copy=True)
    log_jac = np.zeros(p.shape[:-1])
    for b in spec.blocks:
        p1, p2 = p[..., b.idx1], p[..., b.idx2]
        r1 = b.R1(p2, x)
        p1 = p1 * np.exp(r1) + b.M1(p2, x)
        r2 = b.R2(p1, x)
        p2 = p2 * np.exp(r2) + b.M2(p1, x)
        log_jac = log_jac + np.sum(r1, axis=-1) + np.sum(r2, axis=-1)
        p[..., b.idx1] = p1
        p[..., b.idx2] = p2
    _check_finite(p, log_jac)
    return p, log_jac


def coupling_inverse(spec: CouplingSpec, x, p_out):
    """``G_x^{-1}(p_out)``, inverting blocks in reverse order."""
    x = np.asarray(x, dtype=float)
    p = np.array(p_out, dtype=float, copy=True)
    for b in reversed(spec.blocks):
        p1, p2 = p[..., b.idx1], p[..., b.idx2]
        p2 = (p2 - b.M2(p1, x)) * np.exp(-b.R2(p1, x))
        p1 = (p1 - b.M1(p2, x)) * np.exp(-b.R1(p2, x))
        p[..., b.idx1] = p1
        p[..., b.idx2] = p2
    _check_finite(p)
    return p


def coupling_diffeo(spec: CouplingSpec) -> ConditionalDiffeo:
    return ConditionalDiffeo(
        spec.dim,
        lambda x, p: coupling_forward(spec, x, p)[0],
        lambda x, y: coupling_inverse(spec, x, y),
        lambda x, p: coupling_forward(spec, x, p)[1],
        name="coupling",
    )


def identity_coupling(dim: int, K: int = 1) -> CouplingSpec:
    """All nets zero: the identity map with zero log-Jacobian."""
    blocks = []
    for idx1, idx2 in default_splits(dim, K):
        d1, d2 = len(idx1), len(idx2)
        blocks.append(CouplingBlock(idx1, idx2,
                                    SmoothMap.zero(d2 + dim, d1), SmoothMap.zero(d2 + dim, d1),
                                    SmoothMap.zero(d1 + dim, d2), SmoothMap.zero(d1 + dim, d2)))
    return CouplingSpec(dim, blocks)


def random_coupling(dim: int, K: int = 2, seed: int = 0, scale: float = 0.3,
                    step: float | None = None, splits=None) -> CouplingSpec:
    """Random bounded ``tanh`` nets.

    With ``step`` set, the first block also scales by ``step`` (a constant in
    ``R``) and the last block adds ``x`` (a linear term in ``M``), so that
    ``G_x(p)`` is a nonlinear perturbation of the random walk ``x + step * p``.
    ``splits`` overrides :func:`default_splits` with ``K`` explicit
    ``(idx1, idx2)`` pairs.
    """
    rng = np.random.default_rng(seed)
    if splits is None:
        splits = default_splits(dim, K)
    else:
        splits = [(np.asarray(a, dtype=int), np.asarray(b, dtype=int)) for a, b in splits]
        if len(splits) != K:
            raise ValueError(f"expected {K} splits, got {len(splits)}")
    blocks = []
    log_step = 0.0 if step is None else float(np.log(step))
    for i, (idx1, idx2) in enumerate(splits):
        d1, d2 = len(idx1), len(idx2)
        c1 = np.full(d1, log_step) if i == 0 else None
        c2 = np.full(d2, log_step) if i == 0 else None
        A1 = A2 = None
        if step is not None and i == K - 1:
            # select x[idx1] (resp. x[idx2]) out of the concatenated (other half, x)
            A1 = np.zeros((d1, d2 + dim))
            A1[np.arange(d1), d2 + idx1] = 1.0
            A2 = np.zeros((d2, d1 + dim))
            A2[np.arange(d2), d1 + idx2] = 1.0
        blocks.append(CouplingBlock(
            idx1, idx2,
            random_tanh_map(rng, d2 + dim, d1, scale=scale, c=c1),
            random_tanh_map(rng, d2 + dim, d1, scale=scale, A=A1),
            random_tanh_map(rng, d1 + dim, d2, scale=scale, c=c2),
            random_tanh_map(rng, d1 + dim, d2, scale=scale, A=A2),
        ))
    return CouplingSpec(dim, blocks)


def shift_coupling(dim: int, shift) -> CouplingSpec:
    """One block translating the first split by a constant and nothing else."""
    (idx1, idx2), = default_splits(dim, 1)
    d1, d2 = len(idx1), len(idx2)
    block = CouplingBlock(idx1, idx2,
                          SmoothMap.zero(d2 + dim, d1), SmoothMap.constant(d2 + dim, shift),
                          SmoothMap.zero(d1 + dim, d2), SmoothMap.zero(d1 + dim, d2))
    return CouplingSpec(dim, [block])


def mala_map(target, gamma: float) -> ConditionalDiffeo:
    """``G_x(p) = x + gamma grad log pi0(x) + sqrt(2 gamma) p``."""
    if target.gradient is None:
        raise ValueError("mala_map requires a target gradient")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    sq = np.sqrt(2.0 * gamma)
    dim = target.dim
    log_jac_const = 0.5 * dim * np.log(2.0 * gamma)

    def forward(x, p):
        y = np.asarray(x) + gamma * target.grad(x) + sq * np.asarray(p)
        _check_finite(y)
        return y

    def inverse(x, y):
        return (np.asarray(y) - np.asarray(x) - gamma * target.grad(x)) / sq

    def log_jac(x, p):
        return np.full(np.shape(p)[:-1], log_jac_const)

    return ConditionalDiffeo(dim, forward, inverse, log_jac, name=f"mala(gamma={gamma})")
