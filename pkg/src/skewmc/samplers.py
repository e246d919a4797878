"""The eight refreshment schemes built on the GMH kernels.

Every transition is vectorised over a batch of independent chains: positions
have shape ``(B, d)``, momenta ``(B, d)`` and directions ``(B,)``. A single
chain is the case ``B = 1``, so the same code drives trace runs and the
many-chain stationarity checks.

Per-iteration random draws happen in a fixed order, listed below. ``r`` is
the refresh indicator ``U < omega``; a direction draw is
``rng.integers(0, 2, B) * 2 - 1``; ``u`` is the single acceptance uniform,
and a move is accepted iff ``u < a(exp(log_ratio))``.

==========================  =======================================
kind                        draws per iteration
==========================  =======================================
nice_full                   q, u
nice_randomized             r, q, u, p_new
nice_persistent             noise, u
lifted_density              r, w_refresh, q, u
l2hmc_original              q, v, u
l2hmc_lifted_full           r, w_refresh, q, u
l2hmc_lifted_randomized     r, q, w_refresh, u, p_new, v_new
l2hmc_persistent            noise, u
==========================  =======================================

Draws listed for a branch are taken for every chain, whichever branch it
follows, so the stream does not depend on earlier outcomes. Missing initial
momenta and directions are drawn (momentum first) before the first
iteration.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core import AcceptanceFunction, ExtendedState, MomentumDensity, TargetDensity
from .transforms.coupling import CouplingSpec, coupling_diffeo
from .transforms.diffeo import ConditionalDiffeo, Diffeo, apply_signed_batch
from .transforms.l2hmc import L2hmcSpec, l2hmc_diffeo
from .transforms.leapfrog import LeapfrogSpec, leapfrog_forward, nice1_violation

KINDS = (
    "nice_full",
    "nice_randomized",
    "nice_persistent",
    "lifted_density",
    "l2hmc_original",
    "l2hmc_lifted_full",
    "l2hmc_lifted_randomized",
    "l2hmc_persistent",
)
NEEDS_OMEGA = frozenset({"nice_randomized", "lifted_density", "l2hmc_lifted_full",
                         "l2hmc_lifted_randomized"})
NEEDS_BETA = frozenset({"nice_persistent", "l2hmc_persistent"})
KEEPS_MOMENTUM = frozenset({"nice_randomized", "nice_persistent", "l2hmc_lifted_randomized",
                            "l2hmc_persistent"})
KEEPS_DIRECTION = frozenset({"lifted_density", "l2hmc_lifted_full", "l2hmc_lifted_randomized",
                             "l2hmc_persistent"})
NICE_KINDS = frozenset({"nice_full", "nice_randomized", "nice_persistent"})
L2HMC_KINDS = frozenset({"l2hmc_original", "l2hmc_lifted_full", "l2hmc_lifted_randomized",
                         "l2hmc_persistent"})


@dataclass(frozen=True)
class SamplerConfig:
    """Run settings.

    Attributes:
        kind: One of :data:`KINDS`.
        n_steps: Number of transitions.
        seed: 64-bit seed for the run's generator.
        omega: Refresh probability; required by exactly the kinds in
            :data:`NEEDS_OMEGA`. The deterministic (persistent) branch of
            ``nice_randomized`` and ``l2hmc_lifted_randomized`` has weight
            ``1 - omega``, so small ``omega`` means more persistence. For
            ``lifted_density`` the direction is redrawn uniformly on refresh,
            so it flips with probability ``omega / 2``.
        beta: Momentum persistence in ``[0, 1)``; required by exactly the
            kinds in :data:`NEEDS_BETA`.
        acceptance: ``"metropolis"`` or ``"barker"``.
        x0: Initial position; zeros when omitted.
        p0: Initial momentum; drawn from ``phi`` when omitted.
        v0: Initial direction; drawn uniformly when omitted.
    """

    kind: str
    n_steps: int
    seed: int = 0
    omega: Optional[float] = None
    beta: Optional[float] = None
    acceptance: str = "metropolis"
    x0: Optional[np.ndarray] = field(default=None, compare=False)
    p0: Optional[np.ndarray] = field(default=None, compare=False)
    v0: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ValueError("n_steps must be a nonnegative integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.kind in NEEDS_OMEGA:
            if self.omega is None:
                raise ValueError(f"{self.kind} requires omega")
            if not 0.0 <= self.omega <= 1.0:
                raise ValueError("omega must lie in [0, 1]")
        elif self.omega is not None:
            raise ValueError(f"{self.kind} does not take omega")
        if self.kind in NEEDS_BETA:
            if self.beta is None:
                raise ValueError(f"{self.kind} requires beta")
            if not 0.0 <= self.beta < 1.0:
                raise ValueError("beta must lie in [0, 1)")
        elif self.beta is not None:
            raise ValueError(f"{self.kind} does not take beta")
        if self.v0 is not None and self.v0 not in (-1, 1):
            raise ValueError("v0 must be -1 or +1")
        AcceptanceFunction(self.acceptance)


@dataclass
class ChainTrace:
    """Record of one chain.

    ``xs[i]``, ``ps[i]``, ``vs[i]`` describe the state after ``i``
    transitions. ``ps`` and ``vs`` are ``None`` for kinds that do not carry
    momentum or direction between iterations.
    """

    kind: str
    xs: np.ndarray
    accepted: np.ndarray
    log_ratios: np.ndarray
    ps: Optional[np.ndarray] = None
    vs: Optional[np.ndarray] = None

    @property
    def n_steps(self) -> int:
        return len(self.accepted)

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    @property
    def states(self) -> List[ExtendedState]:
        out = []
        for i in range(len(self.xs)):
            p = None if self.ps is None else self.ps[i]
            v = None if self.vs is None else int(self.vs[i])
            out.append(ExtendedState(self.xs[i], p, v))
        return out

    @property
    def proposal_log_ratios(self) -> np.ndarray:
        return self.log_ratios

    @property
    def direction_flips(self) -> int:
        """Number of transitions after which the direction changed sign."""
        if self.vs is None:
            return 0
        return int(np.count_nonzero(self.vs[1:] != self.vs[:-1]))

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accepted)) if self.n_steps else float("nan")


# -- the transition kernel -----------------------------------------------------

def _directions(rng, n):
    return rng.integers(0, 2, size=n) * 2 - 1


def _where_rows(mask, a, b):
    return np.where(mask[:, None], a, b)


class Kernel:
    """One batched transition of a given kind.

    ``transform`` is a :class:`LeapfrogSpec` for the NICE kinds, a
    :class:`Diffeo` on ``R^{2d}`` (or an :class:`L2hmcSpec`) for the L2HMC
    kinds and the ``v = +1`` :class:`ConditionalDiffeo` for
    ``lifted_density``, whose ``v = -1`` family is ``g_minus``.
    """

    def __init__(self, kind: str, target: TargetDensity, phi: MomentumDensity, transform,
                 acceptance: str = "metropolis", omega: Optional[float] = None,
                 beta: Optional[float] = None, g_minus=None):
        if kind not in KINDS:
            raise ValueError(f"unknown sampler kind {kind!r}")
        if not phi.symmetric:
            raise ValueError("momentum density must be symmetric")
        if phi.dim != target.dim:
            raise ValueError("momentum and target dimensions differ")
        if kind in NEEDS_BETA and not phi.gaussian:
            raise ValueError("persistence requires normal momentum")
        self.kind = kind
        self.target = target
        self.phi = phi
        self.a = AcceptanceFunction(acceptance)
        self.omega = omega
        self.beta = beta
        if kind in NICE_KINDS:
            if not isinstance(transform, LeapfrogSpec):
                raise TypeError(f"{kind} needs a LeapfrogSpec")
            if nice1_violation(transform) > 1e-12:
                raise ValueError("leapfrog spec violates N_{m+1-i} = M_i")
        elif kind in L2HMC_KINDS:
            if isinstance(transform, L2hmcSpec):
                transform = l2hmc_diffeo(transform)
            if not isinstance(transform, Diffeo):
                raise TypeError(f"{kind} needs a Diffeo on R^(2d) or an L2hmcSpec")
        else:
            if isinstance(g_minus, CouplingSpec):
                g_minus = coupling_diffeo(g_minus)
            if isinstance(transform, CouplingSpec):
                transform = coupling_diffeo(transform)
            if not (isinstance(transform, ConditionalDiffeo)
                    and isinstance(g_minus, ConditionalDiffeo)):
                raise TypeError("lifted_density needs two ConditionalDiffeo families")
            self.g_minus = g_minus
        self.transform = transform
        self._step = getattr(self, "_" + kind)

    @property
    def keeps_momentum(self) -> bool:
        return self.kind in KEEPS_MOMENTUM

    @property
    def keeps_direction(self) -> bool:
        return self.kind in KEEPS_DIRECTION

    # helpers
    def _log_mu(self, x, p):
        lx = self.target.log_prob(x)
        lp = np.asarray(self.phi.log_density(p), dtype=float)
        return np.where(np.isneginf(lx) | np.isneginf(lp), -np.inf, lx + lp)

    @staticmethod
    def _ratio(num, den):
        with np.errstate(invalid="ignore"):
            return np.where(np.isneginf(den), np.inf, num - den)

    def _accept(self, log_ratio, u):
        return u < self.a.from_log(log_ratio)

    def _draw_p(self, rng, n):
        return self.phi.draw(rng, (n,))

    def _leapfrog(self, x, p):
        return leapfrog_forward(self.transform, x, p)

    def _psi(self, v, x, p):
        d = x.shape[-1]
        out, lj = apply_signed_batch(self.transform, v, np.concatenate([x, p], axis=-1))
        return out[:, :d], out[:, d:], lj

    def init_aux(self, x, p, v, rng):
        """Fill in missing momentum (first) and direction, as needed by the kind."""
        n = x.shape[0]
        if self.keeps_momentum and p is None:
            p = self._draw_p(rng, n)
        if self.keeps_direction and v is None:
            v = _directions(rng, n)
        if not self.keeps_momentum:
            p = None
        if not self.keeps_direction:
            v = None
        return p, v

    def step(self, x, p, v, rng):
        """Advance every chain once; returns ``(x, p, v, accepted, log_ratio)``."""
        return self._step(x, p, v, rng)

    # -- NICE ---------------------------------------------------------------
    def _nice_full(self, x, p, v, rng):
        n = x.shape[0]
        q = self._draw_p(rng, n)
        y, qn = self._leapfrog(x, q)
        u = rng.random(n)
        lr = self._ratio(self._log_mu(y, qn), self._log_mu(x, q))
        acc = self._accept(lr, u)
        return _where_rows(acc, y, x), None, None, acc, lr

    def _nice_randomized(self, x, p, v, rng):
        n = x.shape[0]
        refresh = rng.random(n) < self.omega
        q = self._draw_p(rng, n)
        u = rng.random(n)
        p_new = self._draw_p(rng, n)
        start = _where_rows(refresh, q, p)
        y, qn = self._leapfrog(x, start)
        lr = self._ratio(self._log_mu(y, qn), self._log_mu(x, start))
        acc = self._accept(lr, u)
        x_out = _where_rows(acc, y, x)
        p_det = _where_rows(acc, qn, -p)
        p_out = _where_rows(refresh, p_new, p_det)
        return x_out, p_out, None, acc, lr

    def _nice_persistent(self, x, p, v, rng):
        n = x.shape[0]
        noise = self._draw_p(rng, n)
        q = self.beta * p + np.sqrt(1.0 - self.beta**2) * noise
        y, qn = self._leapfrog(x, q)
        u = rng.random(n)
        lr = self._ratio(self._log_mu(y, qn), self._log_mu(x, q))
        acc = self._accept(lr, u)
        return _where_rows(acc, y, x), _where_rows(acc, qn, -q), None, acc, lr

    # -- lifted density proposals ----------------------------------------------
    def _family(self, w):
        return self.transform if w == 1 else self.g_minus

    def _lifted_density(self, x, p, v, rng):
        n = x.shape[0]
        refresh = rng.random(n) < self.omega
        w_ref = _directions(rng, n)
        w = np.where(refresh, w_ref, v)
        q = self._draw_p(rng, n)
        u = rng.random(n)
        y = np.empty_like(x)
        lq_fwd = np.empty(n)
        lq_rev = np.empty(n)
        for sign in (1, -1):
            m = w == sign
            if not np.any(m):
                continue
            fwd, back = self._family(sign), self._family(-sign)
            y[m] = fwd.forward(x[m], q[m])
            lq_fwd[m] = np.asarray(self.phi.log_density(q[m])) - fwd.log_jac_forward(x[m], q[m])
            lq_rev[m] = back.log_density(self.phi.log_density, y[m], x[m])
        lr = self._ratio(self.target.log_prob(y) + lq_rev, self.target.log_prob(x) + lq_fwd)
        acc = self._accept(lr, u)
        return _where_rows(acc, y, x), None, np.where(acc, w, -w), acc, lr

    # -- L2HMC ---------------------------------------------------------------
    def _l2hmc_original(self, x, p, v, rng):
        n = x.shape[0]
        q = self._draw_p(rng, n)
        w = _directions(rng, n)
        u = rng.random(n)
        y, qn, lj = self._psi(w, x, q)
        lr = self._ratio(self._log_mu(y, qn) + lj, self._log_mu(x, q))
        acc = self._accept(lr, u)
        return _where_rows(acc, y, x), None, None, acc, lr

    def _l2hmc_lifted_full(self, x, p, v, rng):
        n = x.shape[0]
        refresh = rng.random(n) < self.omega
        w_ref = _directions(rng, n)
        w = np.where(refresh, w_ref, v)
        q = self._draw_p(rng, n)
        u = rng.random(n)
        y, qn, lj = self._psi(w, x, q)
        lr = self._ratio(self._log_mu(y, qn) + lj, self._log_mu(x, q))
        acc = self._accept(lr, u)
        return _where_rows(acc, y, x), None, np.where(acc, w, -w), acc, lr

    def _l2hmc_lifted_randomized(self, x, p, v, rng):
        n = x.shape[0]
        refresh = rng.random(n) < self.omega
        q = self._draw_p(rng, n)
        w_ref = _directions(rng, n)
        u = rng.random(n)
        p_new = self._draw_p(rng, n)
        v_new = _directions(rng, n)
        start = _where_rows(refresh, q, p)
        w = np.where(refresh, w_ref, v)
        y, qn, lj = self._psi(w, x, start)
        lr = self._ratio(self._log_mu(y, qn) + lj, self._log_mu(x, start))
        acc = self._accept(lr, u)
        x_out = _where_rows(acc, y, x)
        p_out = _where_rows(refresh, p_new, _where_rows(acc, qn, p))
        v_out = np.where(refresh, v_new, np.where(acc, v, -v))
        return x_out, p_out, v_out, acc, lr

    def _l2hmc_persistent(self, x, p, v, rng):
        n = x.shape[0]
        noise = self._draw_p(rng, n)
        q = self.beta * p + np.sqrt(1.0 - self.beta**2) * noise
        y, qn, lj = self._psi(v, x, q)
        u = rng.random(n)
        lr = self._ratio(self._log_mu(y, qn) + lj, self._log_mu(x, q))
        acc = self._accept(lr, u)
        # on rejection the refreshed momentum is kept; keeping the pre-refresh
        # momentum would break invariance of the momentum marginal
        return _where_rows(acc, y, x), _where_rows(acc, qn, q), np.where(acc, v, -v), acc, lr


def make_kernel(cfg: SamplerConfig, target, phi, transform, g_minus=None) -> Kernel:
    return Kernel(cfg.kind, target, phi, transform, cfg.acceptance, cfg.omega, cfg.beta,
                  g_minus=g_minus)


def advance_ensemble(kernel: Kernel, x, k: int, rng: np.random.Generator, p=None, v=None):
    """Advance a batch of chains ``k`` steps; returns the final ``(x, p, v)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p, v = kernel.init_aux(x, p, v, rng)
    for _ in range(k):
        x, p, v, _, _ = kernel.step(x, p, v, rng)
    return x, p, v


def _run(cfg: SamplerConfig, kernel: Kernel, rng=None) -> ChainTrace:
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    d = kernel.target.dim
    x = np.zeros((1, d)) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float).reshape(1, d)
    p = None if cfg.p0 is None else np.asarray(cfg.p0, dtype=float).reshape(1, d)
    v = None if cfg.v0 is None else np.array([cfg.v0])
    p, v = kernel.init_aux(x, p, v, rng)
    n = cfg.n_steps
    xs = np.empty((n + 1, d))
    ps = np.empty((n + 1, d)) if p is not None else None
    vs = np.empty(n + 1, dtype=int) if v is not None else None
    accepted = np.empty(n, dtype=bool)
    log_ratios = np.empty(n)
    xs[0] = x[0]
    if ps is not None:
        ps[0] = p[0]
    if vs is not None:
        vs[0] = v[0]
    for i in range(n):
        x, p, v, acc, lr = kernel.step(x, p, v, rng)
        xs[i + 1] = x[0]
        if ps is not None:
            ps[i + 1] = p[0]
        if vs is not None:
            vs[i + 1] = v[0]
        accepted[i] = acc[0]
        log_ratios[i] = lr[0]
    return ChainTrace(cfg.kind, xs, accepted, log_ratios, ps, vs)


def _require(cfg, allowed, name):
    if cfg.kind not in allowed:
        raise ValueError(f"{name} cannot run kind {cfg.kind!r}")


def run_nice_full(cfg, target, phi, leapfrog: LeapfrogSpec, rng=None) -> ChainTrace:
    """Full momentum refreshment every iteration; the position chain is reversible."""
    _require(cfg, {"nice_full"}, "run_nice_full")
    return _run(cfg, make_kernel(cfg, target, phi, leapfrog), rng)


def run_nice_randomized(cfg, target, phi, leapfrog: LeapfrogSpec, rng=None) -> ChainTrace:
    """With probability ``omega`` refresh; otherwise a deterministic move that flips on rejection."""
    _require(cfg, {"nice_randomized"}, "run_nice_randomized")
    return _run(cfg, make_kernel(cfg, target, phi, leapfrog), rng)


def run_nice_persistent(cfg, target, phi, leapfrog: LeapfrogSpec, rng=None) -> ChainTrace:
    """Autoregressive momentum refresh ``beta p + sqrt(1 - beta^2) noise``."""
    _require(cfg, {"nice_persistent"}, "run_nice_persistent")
    return _run(cfg, make_kernel(cfg, target, phi, leapfrog), rng)


def run_lifted_density(cfg, target, phi, g_plus, g_minus, rng=None) -> ChainTrace:
    """Lifted sampler with direction-indexed proposal families ``G_{+1,x}``, ``G_{-1,x}``."""
    _require(cfg, {"lifted_density"}, "run_lifted_density")
    return _run(cfg, make_kernel(cfg, target, phi, g_plus, g_minus=g_minus), rng)


def run_l2hmc(cfg, target, phi, psi, rng=None) -> ChainTrace:
    """Any of the four L2HMC schemes, selected by ``cfg.kind``."""
    _require(cfg, L2HMC_KINDS, "run_l2hmc")
    return _run(cfg, make_kernel(cfg, target, phi, psi), rng)


def run_sampler(cfg, target, phi, transform, g_minus=None, rng=None) -> ChainTrace:
    """Dispatch on ``cfg.kind``."""
    return _run(cfg, make_kernel(cfg, target, phi, transform, g_minus=g_minus), rng)


# -- multi-chain driver ------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def chain_seed(master_seed: int, index: int) -> int:
    """Seed of chain ``index``: ``splitmix64((master_seed + index) mod 2^64)``."""
    return splitmix64((int(master_seed) + int(index)) & _MASK64)


class ChainError(RuntimeError):
    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"chain {index}: {type(cause).__name__}: {cause}")
        self.index = index


def run_chains(cfg: SamplerConfig, target, phi, transform, n_chains: int = 1,
               workers: int = 1, g_minus=None) -> List[ChainTrace]:
    """Run independent chains, each with its own generator seeded by :func:`chain_seed`."""
    if n_chains < 1 or workers < 1:
        raise ValueError("n_chains and workers must be positive")
    kernel = make_kernel(cfg, target, phi, transform, g_minus=g_minus)

    def one(i):
        try:
            return _run(cfg, kernel, np.random.default_rng(chain_seed(cfg.seed, i)))
        except Exception as exc:  # attach the chain index
            raise ChainError(i, exc) from exc

    if workers == 1 or n_chains == 1:
        return [one(i) for i in range(n_chains)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(n_chains)))
