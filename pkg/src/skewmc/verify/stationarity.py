"""Ensemble invariance checks by two-sample Kolmogorov-Smirnov tests."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.stats import ks_2samp

from .report import Report

KS_LEVEL = 0.01


def ks_stationarity(kernel, n_chains: int = 10_000, steps: Sequence[int] = (1, 5, 20),
                    seed: int = 0, level: float = KS_LEVEL) -> Report:
    """Start chains at exact target draws and test each coordinate after ``k`` steps.

    Momenta start from ``phi`` and directions uniformly, so the whole extended
    state is stationary. The same ensemble is advanced through the increasing
    step counts; each comparison uses fresh reference draws. A check passes
    when the KS p-value is at least ``level``.
    """
    target = kernel.target
    if target.sample is None:
        raise ValueError("stationarity check needs an exact target sampler")
    rng = np.random.default_rng(seed)
    x = target.sample(n_chains, rng)
    p = kernel.phi.draw(rng, (n_chains,)) if kernel.keeps_momentum else None
    v = rng.integers(0, 2, n_chains) * 2 - 1 if kernel.keeps_direction else None
    rep = Report(f"stationarity ({kernel.kind})")
    done = 0
    for k in sorted(steps):
        for _ in range(k - done):
            x, p, v, _, _ = kernel.step(x, p, v, rng)
        done = k
        ref = target.sample(n_chains, rng)
        for j in range(target.dim):
            pval = float(ks_2samp(x[:, j], ref[:, j]).pvalue)
            rep.add(f"{kernel.kind}_k{k}_x{j}", pval >= level, pval, level)
    return rep
