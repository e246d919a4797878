"""Invertible deterministic maps and their Jacobians."""

from .coupling import (CouplingBlock, CouplingSpec, coupling_diffeo, coupling_forward,
                       coupling_inverse, default_splits, identity_coupling, mala_map,
                       random_coupling, shift_coupling)
from .diffeo import ConditionalDiffeo, Diffeo, apply_signed, apply_signed_batch
from .l2hmc import (L2hmcBlock, L2hmcSpec, MomentumHalfStep, PositionCoupling,
                    l2hmc_diffeo, l2hmc_forward, l2hmc_inverse, leapfrog_l2hmc_spec,
                    random_l2hmc_spec, zero_l2hmc_spec)
from .leapfrog import (LeapfrogSpec, harmonic_spec, hmc_spec, leapfrog_compose,
                       leapfrog_forward, leapfrog_inverse, leapfrog_inverse_step,
                       leapfrog_step, leapfrog_trajectory, momentum_map, nice1_violation, nice_spec,
                       position_map, random_nice_spec, random_nonnice_spec, theta_m,
                       zero_spec)
from .maps import ScaledGradient, SmoothMap, map_lipschitz, random_tanh_map
from .nice_theory import (ConvergenceError, StepBoundError, compute_c0,
                          contraction_constant, g_inverse_fixed_point, max_step_size,
                          step_bound_ok, theta_bound, vartheta1)

__all__ = [name for name in dir() if not name.startswith("_")]
