"""Nonreversible MCMC built from involutions and invertible transforms.

Subpackages: :mod:`skewmc.transforms` (leapfrog, coupling and L2HMC maps),
:mod:`skewmc.verify` (exact and numerical checkers). The sampler kernels
live in :mod:`skewmc.samplers`, chain statistics in
:mod:`skewmc.diagnostics`.
"""

from .core import (BARKER, DIRECTION_FLIP, IDENTITY, METROPOLIS, MOMENTUM_FLIP,
                   AcceptanceFunction, ExtendedState, Involution, MomentumDensity, TargetDensity,
                   acceptance_function, acceptance_value, direction_flip, log_mu, momentum_flip,
                   standard_normal_momentum)
from .diagnostics import (DiagnosticsReport, autocorrelation, diagnose, ergodic_average, ess,
                          histogram_tv, iact)
from .gmh import (FLIP, OPTIMAL_FLIP, STAY, DensityProposal, DeterministicProposal,
                  RejectionPolicy, gmh_accept_density, gmh_accept_deterministic, gmh_step)
from .samplers import (KINDS, ChainError, ChainTrace, Kernel, SamplerConfig, make_kernel,
                       run_chains, run_l2hmc, run_lifted_density, run_nice_full,
                       run_nice_persistent, run_nice_randomized, run_sampler)
from .targets import banana, correlated_gaussian, funnel, gaussian, gaussian_mixture, make_target

__version__ = "0.1.0"
