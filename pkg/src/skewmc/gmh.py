"""Generalised Metropolis-Hastings acceptance and one-step kernels.

Given an involution ``s`` with ``s_# pi = pi``, a proposal accepted with the
probabilities below and completed by a rejection policy gives a kernel
satisfying skew detailed balance,

    pi(dz) P(z, dz') = pi(dz') P(s(z'), d s(z)).

Rejected mass ``1 - Q_alpha(z, Z)`` is split between staying at ``z`` and
jumping to ``s(z)`` according to a :class:`RejectionPolicy`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .core import AcceptanceFunction, ExtendedState, Involution
from .transforms.diffeo import Diffeo, apply_signed

LogPi = Callable[[ExtendedState], float]


@dataclass(frozen=True)
class RejectionPolicy:
    """Where rejected mass goes.

    ``flip`` sends all of it to ``s(z)``, ``stay`` keeps all of it at ``z``.
    Skew detailed balance requires the stay mass to be ``s``-invariant, so
    ``stay`` is only valid when ``Q_alpha(z, Z) = Q_alpha(s(z), Z)``, for
    instance when ``s`` is the identity.
    ``optimal_flip`` sends ``b(z) = max(0, Qa(s(z)) - Qa(z))`` to ``s(z)`` and
    the rest to ``z``, which is the largest flip mass compatible with skew
    detailed balance. It needs ``Qa(z) = Q_alpha(z, Z)`` in closed form, so it is
    only allowed with deterministic proposals.
    """

    kind: str = "flip"

    def __post_init__(self):
        if self.kind not in ("flip", "stay", "optimal_flip"):
            raise ValueError(f"unknown rejection policy {self.kind!r}")

    def weights(self, qa_z, qa_sz=None):
        """Return ``(a(z), b(z))``, the stay and flip masses.

        Args:
            qa_z: ``Q_alpha(z, Z)``.
            qa_sz: ``Q_alpha(s(z), Z)``; needed only by ``optimal_flip``.
        """
        qa_z = np.asarray(qa_z, dtype=float)
        if self.kind == "flip":
            return np.zeros_like(qa_z), 1.0 - qa_z
        if self.kind == "stay":
            return 1.0 - qa_z, np.zeros_like(qa_z)
        if qa_sz is None:
            raise ValueError("optimal_flip needs Q_alpha(s(z), Z)")
        qa_sz = np.asarray(qa_sz, dtype=float)
        b = np.maximum(0.0, qa_sz - qa_z)
        a = 1.0 - np.maximum(qa_z, qa_sz)
        return a, b


FLIP = RejectionPolicy("flip")
STAY = RejectionPolicy("stay")
OPTIMAL_FLIP = RejectionPolicy("optimal_flip")


@dataclass(frozen=True)
class DensityProposal:
    """Proposal kernel with a density ``q(z, z')`` w.r.t. a reference measure."""

    log_q: Callable[[ExtendedState, ExtendedState], float]
    sample: Callable[[ExtendedState, np.random.Generator], ExtendedState]


@dataclass(frozen=True)
class DeterministicProposal:
    """``z -> Phi(z)`` together with ``log J_Phi(z)``."""

    apply: Callable[[ExtendedState], "tuple[ExtendedState, float]"]

    @classmethod
    def from_diffeo(cls, phi: Diffeo) -> "DeterministicProposal":
        """Act on ``x``, or on the concatenation ``(x, p)`` when ``p`` is present.

        The direction, if any, is carried through unchanged.
        """

        def apply(z):
            if z.p is None:
                return z.replace(x=phi.forward(z.x)), float(phi.log_jac_forward(z.x))
            d = z.dim
            w = np.concatenate([z.x, z.p])
            out = phi.forward(w)
            return ExtendedState(out[:d], out[d:], z.v), float(phi.log_jac_forward(w))

        return cls(apply)

    @classmethod
    def signed(cls, psi: Diffeo) -> "DeterministicProposal":
        """``(x, p, v) -> (Psi^v(x, p), v)``, the lifted deterministic move."""

        def apply(z):
            if z.p is None or z.v is None:
                raise ValueError("signed proposal needs momentum and direction")
            d = z.dim
            out, lj = apply_signed(psi, z.v, np.concatenate([z.x, z.p]))
            return ExtendedState(out[:d], out[d:], z.v), float(lj)

        return cls(apply)


def _check_nan(*values):
    for v in values:
        if np.any(np.isnan(v)):
            raise ValueError("invalid log-density: nan")


def gmh_log_ratio_density(log_pi_z, log_pi_zp, log_q_fwd, log_q_rev):
    """Log of ``pi(z') q(s(z'), s(z)) / (pi(z) q(z, z'))``; ``+inf`` when the denominator vanishes."""
    _check_nan(log_pi_z, log_pi_zp, log_q_fwd, log_q_rev)
    denom = np.asarray(log_pi_z, dtype=float) + log_q_fwd
    num = np.asarray(log_pi_zp, dtype=float) + log_q_rev
    with np.errstate(invalid="ignore"):
        out = np.where(np.isneginf(denom), np.inf, num - denom)
    return out[()]


def gmh_accept_density(log_pi_z, log_pi_zp, log_q_fwd, log_q_rev,
                       fn: AcceptanceFunction):
    """Acceptance probability for a density proposal.

    Args:
        log_pi_z: ``log pi(z)``.
        log_pi_zp: ``log pi(z')``.
        log_q_fwd: ``log q(z, z')``.
        log_q_rev: ``log q(s(z'), s(z))``; the caller applies ``s`` to both
            arguments, no equivariance of ``q`` is assumed.
        fn: Acceptance function ``a``.

    Returns:
        ``1`` if ``pi(z) q(z, z') = 0``, else ``a`` of the ratio.
    """
    lr = gmh_log_ratio_density(log_pi_z, log_pi_zp, log_q_fwd, log_q_rev)
    return np.where(np.isposinf(lr), 1.0, fn.from_log(np.where(np.isposinf(lr), 0.0, lr)))[()]


def gmh_log_ratio_deterministic(log_pi_z, log_pi_phi_z, log_jac_phi_z):
    _check_nan(log_pi_z, log_pi_phi_z, log_jac_phi_z)
    log_pi_z = np.asarray(log_pi_z, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.where(np.isneginf(log_pi_z), np.inf,
                       np.asarray(log_pi_phi_z) + log_jac_phi_z - log_pi_z)
    return out[()]


def gmh_accept_deterministic(log_pi_z, log_pi_phi_z, log_jac_phi_z,
                             fn: AcceptanceFunction):
    """``a(pi(Phi(z)) J_Phi(z) / pi(z))``, or ``1`` when ``pi(z) = 0``.

    The involution does not enter.
    """
    lr = gmh_log_ratio_deterministic(log_pi_z, log_pi_phi_z, log_jac_phi_z)
    return np.where(np.isposinf(lr), 1.0, fn.from_log(np.where(np.isposinf(lr), 0.0, lr)))[()]


Proposal = Union[DensityProposal, DeterministicProposal, Diffeo]


def gmh_step(z: ExtendedState, proposal: Proposal, s: Involution, fn: AcceptanceFunction,
             policy: RejectionPolicy, rng: np.random.Generator, log_pi: LogPi,
             full_output: bool = False):
    """One transition of the GMH kernel.

    Draw order: the proposal's own draws, then one uniform for acceptance
    (skipped when ``pi(z) = 0``, where acceptance is certain), then, for
    ``optimal_flip`` after a rejection, one more uniform to choose between
    ``s(z)`` and ``z``.

    Returns:
        ``(next_state, accepted)``, plus the acceptance probability when
        ``full_output`` is set.
    """
    if isinstance(proposal, Diffeo):
        proposal = DeterministicProposal.from_diffeo(proposal)
    lp_z = float(log_pi(z))
    if isinstance(proposal, DensityProposal):
        if policy.kind == "optimal_flip":
            raise ValueError("optimal_flip needs a deterministic proposal")
        zp = proposal.sample(z, rng)
        lq = float(proposal.log_q(z, zp))
        if np.isneginf(lp_z + lq):
            alpha = 1.0
        else:
            lq_rev = float(proposal.log_q(s(zp), s(z)))
            alpha = float(gmh_accept_density(lp_z, float(log_pi(zp)), lq, lq_rev, fn))
    elif isinstance(proposal, DeterministicProposal):
        zp, lj = proposal.apply(z)
        alpha = float(gmh_accept_deterministic(lp_z, float(log_pi(zp)), lj, fn))
    else:
        raise TypeError(f"unsupported proposal type {type(proposal).__name__}")

    def done(nxt, acc):
        return (nxt, acc, alpha) if full_output else (nxt, acc)

    if np.isneginf(lp_z) or rng.random() < alpha:
        return done(zp, True)
    if policy.kind == "flip":
        return done(s(z), False)
    if policy.kind == "stay":
        return done(z, False)
    sz = s(z)
    szp, lj_s = proposal.apply(sz)
    alpha_s = float(gmh_accept_deterministic(float(log_pi(sz)), float(log_pi(szp)), lj_s, fn))
    _, b = policy.weights(alpha, alpha_s)
    # given rejection (mass 1 - alpha), flip with probability b / (1 - alpha)
    if rng.random() * (1.0 - alpha) < b:
        return done(sz, False)
    return done(z, False)
