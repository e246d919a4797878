"""Chain-quality statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

MIN_ESS_LENGTH = 10


def ergodic_average(trace, f: Callable) -> np.ndarray:
    """Running means ``(1/n) sum_{i<n} f(x_i)`` over the trace positions.

    ``trace`` is a :class:`~skewmc.samplers.ChainTrace` or an ``(n, d)``
    array. ``f`` may be vectorised over rows; otherwise it is applied row by
    row.
    """
    xs = np.asarray(getattr(trace, "xs", trace), dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    if len(xs) == 0:
        raise ValueError("empty trace")
    try:
        vals = np.asarray(f(xs), dtype=float)
        if vals.shape != (len(xs),):
            raise ValueError
    except Exception:
        vals = np.array([float(f(x)) for x in xs])
    return np.cumsum(vals) / np.arange(1, len(vals) + 1)


def autocorrelation(series, max_lag: Optional[int] = None) -> np.ndarray:
    """Normalised autocorrelation ``rho_0..rho_max_lag`` by zero-padded FFT.

    Uses the biased (divide by ``n``) autocovariance. A constant series gives
    ``rho_0 = 1`` and zeros elsewhere.
    """
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    if max_lag is None:
        max_lag = n - 1
    x = x - x.mean()
    size = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, size)
    acov = np.fft.irfft(spec * np.conj(spec), size)[: max_lag + 1] / n
    out = np.zeros(max_lag + 1)
    if acov[0] <= 0:
        out[0] = 1.0
        return out
    return acov / acov[0]


def ess(series) -> float:
    """Effective sample size with the initial positive sequence truncation.

    ``n / tau`` with ``tau = -1 + 2 sum_{m<M} (rho_{2m} + rho_{2m+1})``,
    summing pairs until the first nonpositive one. The result is clamped to
    ``[1, n]``; a constant series returns the floor value 1.

    Raises:
        ValueError: fewer than 10 values.
    """
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    if n < MIN_ESS_LENGTH:
        raise ValueError(f"series too short for ESS (need >= {MIN_ESS_LENGTH}, got {n})")
    if np.ptp(x) == 0:
        return 1.0
    rho = autocorrelation(x)
    if rho.shape[0] % 2:
        rho = np.append(rho, 0.0)
    pairs = rho[0::2] + rho[1::2]
    nonpos = np.flatnonzero(pairs <= 0)
    stop = nonpos[0] if nonpos.size else pairs.shape[0]
    tau = -1.0 + 2.0 * float(np.sum(pairs[:stop]))
    if tau <= 0:
        return float(n)
    return float(min(max(n / tau, 1.0), n))


def iact(series) -> float:
    """Integrated autocorrelation time ``n / ess``."""
    return len(series) / ess(series)


# -- histogram total variation -------------------------------------------------------

def _quantile_edges(ref: np.ndarray, bins: int) -> np.ndarray:
    edges = np.quantile(ref, np.linspace(0.0, 1.0, bins + 1))
    edges[0], edges[-1] = -np.inf, np.inf
    return edges


def _cell_index(points, edges_per_axis):
    idx = np.zeros(points.shape[0], dtype=np.int64)
    for axis, edges in enumerate(edges_per_axis):
        inner = edges[1:-1]
        k = np.searchsorted(inner, points[:, axis], side="right")
        idx = idx * (len(edges) - 1) + k
    return idx


def histogram_tv_distance(samples, reference, bins: int = 32) -> float:
    """TV distance between histograms on quantile bins fitted to ``reference``."""
    samples = np.asarray(samples, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if reference.ndim == 1:
        reference = reference[:, None]
    d = reference.shape[1]
    if d > 2:
        raise ValueError("histogram TV supports 1-d or 2-d positions; project first")
    edges = [_quantile_edges(reference[:, j], bins) for j in range(d)]
    cells = bins**d
    p = np.bincount(_cell_index(samples, edges), minlength=cells) / samples.shape[0]
    q = np.bincount(_cell_index(reference, edges), minlength=cells) / reference.shape[0]
    return 0.5 * float(np.sum(np.abs(p - q)))


def histogram_tv(trace_states, target_sampler, bins: int = 32,
                 step_marks: Optional[Sequence[int]] = None, n_reference: Optional[int] = None,
                 seed: int = 0) -> Dict[int, float]:
    """TV-vs-step curve for an ensemble of chains.

    Args:
        trace_states: Array ``(n_steps + 1, n_chains, d)`` (or a list of
            ``(n_chains, d)`` arrays): ensemble positions after each step.
        target_sampler: Exact sampler ``(n, rng) -> (n, d)``, or an array of
            reference draws.
        bins: Quantile bins per axis.
        step_marks: Steps at which to evaluate; all steps by default.
        n_reference: Reference sample size; defaults to the chain count.
        seed: Seed for the reference draws.

    Returns:
        Mapping ``step -> TV distance``.
    """
    states = [np.asarray(s, dtype=float) for s in trace_states]
    if states[0].ndim == 1:
        states = [s[:, None] for s in states]
    if states[0].shape[1] > 2:
        raise ValueError("histogram TV supports 1-d or 2-d positions; project first")
    if callable(target_sampler):
        n_ref = n_reference or states[0].shape[0]
        reference = target_sampler(n_ref, np.random.default_rng(seed))
    else:
        reference = np.asarray(target_sampler, dtype=float)
    marks = range(len(states)) if step_marks is None else step_marks
    return {int(k): histogram_tv_distance(states[k], reference, bins) for k in marks}


def ensemble_tv_curve(kernel, x0, step_marks: Sequence[int], reference, rng,
                      bins: int = 32) -> Dict[int, float]:
    """Advance an ensemble through ``step_marks`` and record the TV distance at each."""
    x = np.atleast_2d(np.asarray(x0, dtype=float))
    p, v = kernel.init_aux(x, None, None, rng)
    out = {}
    done = 0
    for k in sorted(step_marks):
        for _ in range(k - done):
            x, p, v, _, _ = kernel.step(x, p, v, rng)
        done = k
        out[int(k)] = histogram_tv_distance(x, reference, bins)
    return out


# -- report ---------------------------------------------------------------------------

@dataclass
class DiagnosticsReport:
    """Summary of one chain.

    Statistics use the ``n_steps`` post-transition positions, so ESS lies in
    ``[1, n_steps]``.
    """

    n_steps: int
    mean: np.ndarray
    variance: np.ndarray
    ess: np.ndarray
    iact: np.ndarray
    acceptance_rate: float
    direction_flip_rate: float
    tv_curve: Optional[Dict[int, float]] = field(default=None)

    @property
    def mcse(self) -> np.ndarray:
        """ESS-corrected standard error of each coordinate mean."""
        return np.sqrt(self.variance / self.ess)

    def to_dict(self) -> dict:
        out = {
            "n_steps": int(self.n_steps),
            "mean": [float(v) for v in self.mean],
            "variance": [float(v) for v in self.variance],
            "ess": [float(v) for v in self.ess],
            "iact": [float(v) for v in self.iact],
            "mcse": [float(v) for v in self.mcse],
            "acceptance_rate": float(self.acceptance_rate),
            "direction_flip_rate": float(self.direction_flip_rate),
        }
        if self.tv_curve is not None:
            out["tv_curve"] = {str(k): float(v) for k, v in self.tv_curve.items()}
        return out


def diagnose(trace, tv_curve: Optional[Dict[int, float]] = None) -> DiagnosticsReport:
    """Per-coordinate moments, ESS and IACT plus acceptance and flip rates."""
    xs = np.asarray(trace.xs, dtype=float)[1:]
    n = xs.shape[0]
    if n < MIN_ESS_LENGTH:
        raise ValueError(f"need at least {MIN_ESS_LENGTH} steps to diagnose, got {n}")
    e = np.array([ess(xs[:, j]) for j in range(xs.shape[1])])
    flip_rate = trace.direction_flips / n
    return DiagnosticsReport(
        n_steps=n,
        mean=xs.mean(axis=0),
        variance=xs.var(axis=0, ddof=1),
        ess=e,
        iact=n / e,
        acceptance_rate=float(np.mean(trace.accepted)),
        direction_flip_rate=float(flip_rate),
        tv_curve=tv_curve,
    )
