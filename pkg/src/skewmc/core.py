"""Shared domain types: target and momentum densities, extended states,
acceptance functions and involutions.

All densities are handled in log space. A zero density is encoded as a
log-density of ``-inf``; ``nan`` is never a valid log-density.

Array convention: every density, gradient and map in this package accepts
arrays of shape ``(..., dim)`` and broadcasts over the leading axes. A single
point is a 1-d array of length ``dim``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

LogDensityFn = Callable[[np.ndarray], np.ndarray]
GradientFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TargetDensity:
    """Unnormalized target density on ``R^dim``.

    Attributes:
        dim: Dimension of the position space.
        log_density: Log of the unnormalized density, ``-inf`` where it vanishes.
        gradient: Gradient of ``log_density``; required by the MALA map and the
            L2HMC momentum blocks.
        sample: Optional exact sampler ``(n, rng) -> (n, dim)``, used by the
            statistical checks.
        mean: Optional exact mean, used by the ergodic-average checks.
    """

    dim: int
    log_density: LogDensityFn
    gradient: Optional[GradientFn] = None
    sample: Optional[Callable[[int, np.random.Generator], np.ndarray]] = None
    mean: Optional[np.ndarray] = None
    name: str = "custom"

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be a positive integer")

    def log_prob(self, x: np.ndarray) -> np.ndarray:
        """Evaluate ``log_density`` and reject ``nan`` outputs."""
        out = np.asarray(self.log_density(x), dtype=float)
        if np.any(np.isnan(out)):
            raise ValueError("invalid log-density: target returned nan")
        return out

    def grad(self, x: np.ndarray) -> np.ndarray:
        if self.gradient is None:
            raise ValueError("target has no gradient")
        return np.asarray(self.gradient(x), dtype=float)


@dataclass(frozen=True)
class MomentumDensity:
    """Auxiliary momentum density ``phi`` on ``R^dim``.

    ``gaussian`` marks the standard normal, which is the only momentum law the
    autoregressive (persistent) refresh preserves.
    """

    dim: int
    log_density: LogDensityFn
    sample: Callable[[np.random.Generator, tuple], np.ndarray]
    symmetric: bool = True
    gaussian: bool = False

    def draw(self, rng: np.random.Generator, batch: tuple = ()) -> np.ndarray:
        return np.asarray(self.sample(rng, batch), dtype=float)


def standard_normal_momentum(dim: int) -> MomentumDensity:
    """Unnormalized standard normal momentum, ``log phi(p) = -|p|^2 / 2``."""

    def log_density(p):
        p = np.asarray(p, dtype=float)
        return -0.5 * np.sum(p * p, axis=-1)

    def sample(rng, batch=()):
        return rng.standard_normal(tuple(batch) + (dim,))

    return MomentumDensity(dim, log_density, sample, symmetric=True, gaussian=True)


@dataclass(frozen=True)
class ExtendedState:
    """Position ``x`` with optional momentum ``p`` and direction ``v``."""

    x: np.ndarray
    p: Optional[np.ndarray] = None
    v: Optional[int] = None

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        object.__setattr__(self, "x", x)
        if self.p is not None:
            p = np.atleast_1d(np.asarray(self.p, dtype=float))
            if p.shape != x.shape:
                raise ValueError(
                    f"momentum shape {p.shape} does not match position shape {x.shape}"
                )
            object.__setattr__(self, "p", p)
        if self.v is not None:
            if self.v not in (-1, 1):
                raise ValueError(f"direction must be -1 or +1, got {self.v!r}")
            object.__setattr__(self, "v", int(self.v))

    @property
    def dim(self) -> int:
        return self.x.shape[-1]

    def replace(self, **changes) -> "ExtendedState":
        fields = {"x": self.x, "p": self.p, "v": self.v}
        fields.update(changes)
        return ExtendedState(**fields)

    def same_as(self, other: "ExtendedState") -> bool:
        """Bit-exact equality of all present components."""
        if (self.p is None) != (other.p is None) or self.v != other.v:
            return False
        if not np.array_equal(self.x, other.x):
            return False
        return self.p is None or np.array_equal(self.p, other.p)


# -- acceptance functions ---------------------------------------------------

def _metropolis_from_log(log_t):
    return np.exp(np.minimum(0.0, log_t))


def _barker_from_log(log_t):
    return expit(log_t)


_BUILTIN_ACCEPTANCE = {"metropolis": _metropolis_from_log, "barker": _barker_from_log}


@dataclass(frozen=True)
class AcceptanceFunction:
    """Acceptance function ``a`` with ``a(0) = 0`` and ``t a(1/t) = a(t)``.

    Built-in kinds are ``metropolis`` (``min(1, t)``) and ``barker``
    (``t / (1 + t)``). A ``custom`` kind takes a user function of the
    log-ratio; the balance identity is then the user's responsibility and can
    be checked with :func:`skewmc.verify.check_acceptance_identity`.
    """

    kind: str = "metropolis"
    from_log_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        if self.kind == "custom":
            if self.from_log_fn is None:
                raise ValueError("custom acceptance function needs from_log_fn")
        elif self.kind not in _BUILTIN_ACCEPTANCE:
            raise ValueError(f"unknown acceptance kind {self.kind!r}")

    def from_log(self, log_t):
        """``a(exp(log_t))`` computed without forming ``exp(log_t)``."""
        log_t = np.asarray(log_t, dtype=float)
        if np.any(np.isnan(log_t)):
            raise ValueError("invalid ratio: nan")
        fn = self.from_log_fn if self.kind == "custom" else _BUILTIN_ACCEPTANCE[self.kind]
        out = np.clip(fn(log_t), 0.0, 1.0)
        return out[()] if out.ndim == 0 else out

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(np.isnan(t)):
            raise ValueError("invalid ratio: nan")
        if np.any(t < 0):
            raise ValueError("invalid ratio: negative")
        if self.kind == "metropolis":
            out = np.minimum(1.0, t)
        elif self.kind == "barker":
            # t / (1 + t) with t = inf giving 1
            out = np.where(np.isinf(t), 1.0, t / (1.0 + np.where(np.isinf(t), 0.0, t)))
        else:
            with np.errstate(divide="ignore"):
                return self.from_log(np.log(t))
        return out[()] if out.ndim == 0 else out

    __call__ = evaluate


METROPOLIS = AcceptanceFunction("metropolis")
BARKER = AcceptanceFunction("barker")


def acceptance_function(kind: str) -> AcceptanceFunction:
    return AcceptanceFunction(kind)


def acceptance_value(fn: AcceptanceFunction, t=None, *, log_t=None):
    """Evaluate ``a(t)``; pass ``log_t`` instead of ``t`` to avoid overflow."""
    if (t is None) == (log_t is None):
        raise TypeError("pass exactly one of t, log_t")
    return fn.evaluate(t) if log_t is None else fn.from_log(log_t)


# -- involutions ------------------------------------------------------------

def momentum_flip(z: ExtendedState) -> ExtendedState:
    """``(x, p, v) -> (x, -p, v)``."""
    if z.p is None:
        raise ValueError("state has no momentum")
    return ExtendedState(z.x, -z.p, z.v)


def direction_flip(z: ExtendedState) -> ExtendedState:
    """``(x, p, v) -> (x, p, -v)``."""
    if z.v is None:
        raise ValueError("state has no direction")
    return ExtendedState(z.x, z.p, -z.v)


def _identity(z: ExtendedState) -> ExtendedState:
    return z


@dataclass(frozen=True)
class Involution:
    """A map ``s`` with ``s(s(z)) = z``.

    Custom involutions are trusted; use
    :func:`skewmc.verify.check_involution` to test the property.
    """

    kind: str
    apply: Callable[[ExtendedState], ExtendedState] = field(repr=False, compare=False)

    def __call__(self, z: ExtendedState) -> ExtendedState:
        return self.apply(z)

    @classmethod
    def custom(cls, fn: Callable[[ExtendedState], ExtendedState]) -> "Involution":
        return cls("custom", fn)


IDENTITY = Involution("identity", _identity)
MOMENTUM_FLIP = Involution("momentum_flip", momentum_flip)
DIRECTION_FLIP = Involution("direction_flip", direction_flip)


def log_mu(target: TargetDensity, phi: MomentumDensity, x, p) -> float:
    """``log pi0(x) + log phi(p)``, ``-inf`` when either factor vanishes."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if x.shape[-1] != target.dim or p.shape[-1] != phi.dim or x.shape != p.shape:
        raise ValueError(
            f"dimension mismatch: x{x.shape}, p{p.shape}, target dim {target.dim}, "
            f"momentum dim {phi.dim}"
        )
    lx = target.log_prob(x)
    lp = np.asarray(phi.log_density(p), dtype=float)
    # -inf + finite stays -inf; guard the (-inf) + (+inf) corner
    return np.where(np.isneginf(lx) | np.isneginf(lp), -np.inf, lx + lp)[()]
