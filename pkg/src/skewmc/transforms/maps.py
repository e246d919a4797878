"""Closed-form smooth maps used as drift, scale and shift functions.

These stand in for trained networks. Each map is an affine part plus a
single bounded ``tanh`` layer,

    u -> A u + c + scale * tanh(W u + b),

so its Lipschitz constant is bounded by ``|A|_2 + max|scale| * |W|_2``.
Multi-argument calls concatenate the arguments along the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class SmoothMap:
    in_dim: int
    out_dim: int
    A: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    W: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None

    def __call__(self, *args):
        u = args[0] if len(args) == 1 else np.concatenate(
            [np.asarray(a, dtype=float) for a in args], axis=-1)
        u = np.asarray(u, dtype=float)
        out = None
        if self.A is not None:
            out = u @ self.A.T
        if self.c is not None:
            out = self.c if out is None else out + self.c
        if self.W is not None:
            t = self.scale * np.tanh(u @ self.W.T + self.b)
            out = t if out is None else out + t
        shape = u.shape[:-1] + (self.out_dim,)
        if out is None:
            return np.zeros(shape)
        return np.broadcast_to(out, shape).copy() if np.shape(out) != shape else out

    @property
    def lipschitz(self) -> float:
        """Upper bound on the Lipschitz constant (spectral norms)."""
        bound = 0.0
        if self.A is not None and self.A.size:
            bound += np.linalg.norm(self.A, 2)
        if self.W is not None and self.W.size:
            bound += float(np.max(np.abs(self.scale))) * np.linalg.norm(self.W, 2)
        return float(bound)

    @classmethod
    def zero(cls, in_dim: int, out_dim: int) -> "SmoothMap":
        return cls(in_dim, out_dim)

    @classmethod
    def constant(cls, in_dim: int, value) -> "SmoothMap":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(in_dim, value.shape[0], c=value)

    @classmethod
    def linear(cls, A, c=None) -> "SmoothMap":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        c = None if c is None else np.asarray(c, dtype=float)
        return cls(A.shape[1], A.shape[0], A=A, c=c)


def random_tanh_map(rng: np.random.Generator, in_dim: int, out_dim: int,
                    scale: float = 0.1, weight_scale: float = 1.0,
                    A=None, c=None) -> SmoothMap:
    """``A u + c + scale * tanh(W u + b)`` with Gaussian ``W`` and ``b``."""
    W = rng.standard_normal((out_dim, in_dim)) * weight_scale / np.sqrt(max(in_dim, 1))
    b = rng.standard_normal(out_dim) * 0.5
    if A is not None:
        A = np.atleast_2d(np.asarray(A, dtype=float))
    return SmoothMap(in_dim, out_dim, A=A, c=c, W=W, b=b,
                     scale=np.full(out_dim, float(scale)))


@dataclass(frozen=True, eq=False)
class ScaledGradient:
    """``x -> factor * grad log pi0(x)``, optionally with a declared Lipschitz bound."""

    gradient: Callable[[np.ndarray], np.ndarray]
    factor: float = 0.5
    declared_lipschitz: Optional[float] = None

    def __call__(self, x):
        return self.factor * np.asarray(self.gradient(x), dtype=float)

    @property
    def lipschitz(self) -> Optional[float]:
        if self.declared_lipschitz is None:
            return None
        return abs(self.factor) * self.declared_lipschitz


def map_lipschitz(f) -> Optional[float]:
    """The analytic Lipschitz bound of ``f`` when it carries one."""
    return getattr(f, "lipschitz", None)
