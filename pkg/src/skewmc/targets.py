"""Target zoo with analytic gradients, exact samplers and means.

All densities are positive and smooth everywhere, so every zoo member can be
used with gradient-based maps.
"""

from __future__ import annotations

import numpy as np

from .core import TargetDensity


def gaussian(dim: int = 1, mean=None, cov_diag=None) -> TargetDensity:
    """Unnormalized ``N(mean, diag(cov_diag))``."""
    mean = np.zeros(dim) if mean is None else np.broadcast_to(np.asarray(mean, float), (dim,)).copy()
    var = np.ones(dim) if cov_diag is None else np.broadcast_to(np.asarray(cov_diag, float), (dim,)).copy()
    if np.any(var <= 0):
        raise ValueError("cov_diag entries must be positive")
    sd = np.sqrt(var)

    def log_density(x):
        z = np.asarray(x, float) - mean
        return -0.5 * np.sum(z * z / var, axis=-1)

    def gradient(x):
        return -(np.asarray(x, float) - mean) / var

    def sample(n, rng):
        return mean + sd * rng.standard_normal((n, dim))

    return TargetDensity(dim, log_density, gradient, sample, mean, name="gaussian")


def correlated_gaussian(cov) -> TargetDensity:
    """Zero-mean Gaussian with full covariance ``cov``."""
    cov = np.atleast_2d(np.asarray(cov, float))
    dim = cov.shape[0]
    prec = np.linalg.inv(cov)
    chol = np.linalg.cholesky(cov)

    def log_density(x):
        x = np.asarray(x, float)
        return -0.5 * np.einsum("...i,ij,...j->...", x, prec, x)

    def gradient(x):
        return -np.asarray(x, float) @ prec

    def sample(n, rng):
        return rng.standard_normal((n, dim)) @ chol.T

    return TargetDensity(dim, log_density, gradient, sample, np.zeros(dim),
                         name="correlated_gaussian")


def gaussian_mixture(weights, means, scales) -> TargetDensity:
    """Mixture of isotropic Gaussians ``sum_k w_k N(mu_k, sigma_k^2 I)``."""
    w = np.asarray(weights, float)
    mu = np.atleast_2d(np.asarray(means, float))
    sig = np.broadcast_to(np.asarray(scales, float), w.shape).copy()
    if w.ndim != 1 or mu.shape[0] != w.shape[0]:
        raise ValueError("weights and means must have matching component counts")
    if np.any(w <= 0) or np.any(sig <= 0):
        raise ValueError("weights and scales must be positive")
    w = w / w.sum()
    dim = mu.shape[1]
    log_c = np.log(w) - dim * np.log(sig)
    half_prec = 0.5 / sig**2
    prec = 1.0 / sig**2

    # method reductions and a hand-rolled max shift: the generic wrappers dominate on tiny arrays
    def _component_logs(x):
        z = np.asarray(x, float)[..., None, :] - mu
        return log_c - (z * z).sum(-1) * half_prec, z

    def _shifted(logs):
        top = logs.max(-1, keepdims=True)
        e = np.exp(logs - top)
        return top[..., 0], e, e.sum(-1)

    def log_density(x):
        top, _, tot = _shifted(_component_logs(x)[0])
        return top + np.log(tot)

    def gradient(x):
        logs, z = _component_logs(x)
        _, e, tot = _shifted(logs)
        resp = e * (prec / tot[..., None])
        return -(resp[..., None] * z).sum(-2)

    def sample(n, rng):
        k = rng.choice(len(w), size=n, p=w)
        return mu[k] + sig[k, None] * rng.standard_normal((n, dim))

    return TargetDensity(dim, log_density, gradient, sample, w @ mu, name="gaussian_mixture")


def banana(dim: int = 2, curvature: float = 1.0) -> TargetDensity:
    """Twisted Gaussian: ``x0 ~ N(0,1)``, ``x1 | x0 ~ N(b (x0^2 - 1), 1)``, rest ``N(0,1)``."""
    if dim < 2:
        raise ValueError("banana needs dim >= 2")
    b = float(curvature)

    def log_density(x):
        x = np.asarray(x, float)
        u = x[..., 1] - b * (x[..., 0] ** 2 - 1.0)
        return -0.5 * (x[..., 0] ** 2 + u * u + np.sum(x[..., 2:] ** 2, axis=-1))

    def gradient(x):
        x = np.asarray(x, float)
        u = x[..., 1] - b * (x[..., 0] ** 2 - 1.0)
        g = -x.copy()
        g[..., 0] = -x[..., 0] + 2.0 * b * x[..., 0] * u
        g[..., 1] = -u
        return g

    def sample(n, rng):
        z = rng.standard_normal((n, dim))
        z[:, 1] += b * (z[:, 0] ** 2 - 1.0)
        return z

    return TargetDensity(dim, log_density, gradient, sample, np.zeros(dim), name="banana")


def funnel(dim: int = 2, scale: float = 3.0) -> TargetDensity:
    """Neal's funnel: ``x0 ~ N(0, scale^2)``, ``x_k | x0 ~ N(0, exp(x0))``."""
    if dim < 2:
        raise ValueError("funnel needs dim >= 2")
    k = dim - 1

    def log_density(x):
        x = np.asarray(x, float)
        v = x[..., 0]
        return (-0.5 * v * v / scale**2 - 0.5 * k * v
                - 0.5 * np.exp(-v) * np.sum(x[..., 1:] ** 2, axis=-1))

    def gradient(x):
        x = np.asarray(x, float)
        v = x[..., 0]
        e = np.exp(-v)
        g = np.empty_like(x)
        g[..., 0] = -v / scale**2 - 0.5 * k + 0.5 * e * np.sum(x[..., 1:] ** 2, axis=-1)
        g[..., 1:] = -x[..., 1:] * e[..., None]
        return g

    def sample(n, rng):
        v = scale * rng.standard_normal(n)
        rest = np.exp(0.5 * v)[:, None] * rng.standard_normal((n, k))
        return np.column_stack([v, rest])

    return TargetDensity(dim, log_density, gradient, sample, np.zeros(dim), name="funnel")


ZOO = {
    "gaussian": gaussian,
    "gaussian_mixture": gaussian_mixture,
    "banana": banana,
    "funnel": funnel,
}


def make_target(name: str, **params) -> TargetDensity:
    try:
        factory = ZOO[name]
    except KeyError:
        raise ValueError(f"unknown target {name!r}; choose from {sorted(ZOO)}") from None
    return factory(**params)
