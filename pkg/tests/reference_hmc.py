"""Textbook leapfrog HMC, written without the library's integrators.

Used as an independent oracle. The per-iteration draw order matches the
library's samplers: momentum, (direction,) uniform.
"""

import math

import numpy as np


def leapfrog(grad, x, p, h, n_steps):
    x = np.array(x, dtype=float)
    p = np.array(p, dtype=float)
    for _ in range(n_steps):
        p = p + (h / 2) * grad(x)
        x = x + h * p
        p = p + (h / 2) * grad(x)
    return x, p


def hmc_chain(log_pi, grad, x0, h, n_leapfrog, n_iter, seed, draw_direction=False):
    """Run HMC and return the ``(n_iter + 1, d)`` array of positions.

    With ``draw_direction`` a sign ``v`` is drawn between momentum and
    uniform, and the trajectory starts from ``v * q``.
    """
    rng = np.random.default_rng(seed)
    x = np.array(x0, dtype=float)
    d = x.shape[0]
    out = [x.copy()]
    for _ in range(n_iter):
        q = rng.standard_normal((1, d))[0]
        if draw_direction:
            v = int(rng.integers(0, 2, size=1)[0]) * 2 - 1
            q_start = v * q
        else:
            q_start = q
        u = rng.random(1)[0]
        y, q_end = leapfrog(grad, x, q_start, h, n_leapfrog)
        h_old = log_pi(x) - 0.5 * float(np.sum(q * q))
        h_new = log_pi(y) - 0.5 * float(np.sum(q_end * q_end))
        if u < math.exp(min(0.0, h_new - h_old)):
            x = y
        out.append(x.copy())
    return np.array(out)
