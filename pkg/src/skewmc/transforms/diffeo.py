"""Invertible maps with tractable log-Jacobians."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError("map diverged")


@dataclass(frozen=True)
class Diffeo:
    """A C^1 diffeomorphism of ``R^dim``.

    ``log_jac_forward(z)`` is ``log |det D forward(z)|``. ``dim`` may be
    ``None`` when the map works in any dimension. The optional fused hooks
    return ``(image, log_jac)`` in one pass, where ``log_jac`` is that of the
    applied map at its input; :func:`apply_signed` uses them when present.
    """

    dim: Optional[int]
    forward: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    inverse: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    log_jac_forward: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    name: str = "diffeo"
    forward_with_log_jac: Optional[Callable] = field(default=None, repr=False, compare=False)
    inverse_with_log_jac: Optional[Callable] = field(default=None, repr=False, compare=False)

    def log_jac_inverse(self, y):
        """``log |det D inverse(y)|`` from the forward Jacobian at ``inverse(y)``."""
        return -np.asarray(self.log_jac_forward(self.inverse(y)))

    def inverted(self) -> "Diffeo":
        return Diffeo(self.dim, self.inverse, self.forward, self.log_jac_inverse,
                      name=f"inverse({self.name})",
                      forward_with_log_jac=self.inverse_with_log_jac,
                      inverse_with_log_jac=self.forward_with_log_jac)


@dataclass(frozen=True)
class ConditionalDiffeo:
    """A family ``p -> G_x(p)`` of diffeomorphisms of ``R^dim`` indexed by ``x``.

    ``log_jac_forward(x, p)`` is ``log |det D_p G_x(p)|``.
    """

    dim: int
    forward: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    inverse: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    log_jac_forward: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    name: str = "conditional"

    def log_density(self, phi_log_density, x, y):
        """Log of the proposal density ``phi(G_x^{-1}(y)) J_{G_x^{-1}}(y)``."""
        p = self.inverse(x, y)
        return np.asarray(phi_log_density(p)) - np.asarray(self.log_jac_forward(x, p))


def apply_signed(psi: Diffeo, v: int, point):
    """Apply ``psi`` (``v = +1``) or its inverse (``v = -1``).

    Returns ``(image, log_jac)`` where ``log_jac`` is the log-Jacobian of the
    applied map at ``point``. For ``v = -1`` it is ``-log_jac_forward`` at the
    inverse image, by Jacobian reciprocity.
    """
    if v == 1:
        if psi.forward_with_log_jac is not None:
            image, lj = psi.forward_with_log_jac(point)
            return image, np.asarray(lj)
        return psi.forward(point), np.asarray(psi.log_jac_forward(point))
    if v == -1:
        if psi.inverse_with_log_jac is not None:
            image, lj = psi.inverse_with_log_jac(point)
            return image, np.asarray(lj)
        image = psi.inverse(point)
        return image, -np.asarray(psi.log_jac_forward(image))
    raise ValueError(f"direction must be -1 or +1, got {v!r}")


def apply_signed_batch(psi: Diffeo, v: np.ndarray, points: np.ndarray):
    """Vectorised :func:`apply_signed` with a per-row direction array."""
    v = np.asarray(v)
    points = np.asarray(points, dtype=float)
    if not np.all((v == 1) | (v == -1)):
        raise ValueError("directions must be -1 or +1")
    image = np.empty_like(points)
    log_jac = np.empty(points.shape[:-1])
    for sign in (1, -1):
        mask = v == sign
        if np.any(mask):
            image[mask], log_jac[mask] = apply_signed(psi, sign, points[mask])
    return image, log_jac
