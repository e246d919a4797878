"""Exact finite-space checks, sampled identity checks and statistical tests."""

from .finite import (ChainFileError, FiniteChain, FiniteChainError, check_acceptance_conditions,
                     check_invariance, check_lifted_marginal_reversibility, check_s_symmetry,
                     check_singular_parts, check_support_conditions, finite_alpha,
                     finite_build_gmh, finite_nu_decomposition, format_finite_chain,
                     irreducibility_witness, lifted_finite_chain, load_finite_chain,
                     parse_finite_chain, policy_admissible, random_finite_chain,
                     random_self_inverse_perm, verify_finite_chain)
from .identities import (check_acceptance_identity, check_gradient, check_involution,
                         check_involution_identity, check_log_jacobian, check_momentum_symmetry,
                         check_nice1, check_nice_identities,
                         check_position_map_nonsingular, closed_form_iterates,
                         estimate_lipschitz, fd_jacobian, fd_log_jacobian, refutes_lipschitz)
from .report import CheckResult, Report
from .stationarity import KS_LEVEL, ks_stationarity
from .suites import (SUITES, finite_suite, identities_suite, jacobians_suite, random_chain_batch,
                     run_suite, standard_kernels, stationarity_suite)

__all__ = [name for name in dir() if not name.startswith("_")]
