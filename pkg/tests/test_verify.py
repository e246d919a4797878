import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skewmc.core import BARKER, METROPOLIS, AcceptanceFunction, standard_normal_momentum
from skewmc.gmh import FLIP, OPTIMAL_FLIP, STAY
from skewmc.transforms import (StepBoundError, harmonic_spec, max_step_size, random_nonnice_spec,
                               zero_spec)
from skewmc.transforms.maps import SmoothMap
from skewmc.verify import (ChainFileError, FiniteChain, FiniteChainError,
                           check_acceptance_conditions, check_acceptance_identity,
                           check_invariance, check_lifted_marginal_reversibility,
                           check_nice_identities, check_s_symmetry, check_singular_parts,
                           check_support_conditions, fd_log_jacobian, finite_alpha,
                           finite_build_gmh, finite_nu_decomposition, finite_suite,
                           format_finite_chain, identities_suite, irreducibility_witness,
                           jacobians_suite, lifted_finite_chain, parse_finite_chain,
                           policy_admissible, random_finite_chain, refutes_lipschitz, run_suite,
                           verify_finite_chain)


def chain3():
    """3 states, s = id, nonuniform pi and non-symmetric Q, so r != 1 somewhere."""
    pi = np.array([0.2, 0.3, 0.5])
    Q = np.array([[0.2, 0.5, 0.3], [0.1, 0.6, 0.3], [0.4, 0.4, 0.2]])
    return FiniteChain(pi, Q, np.arange(3))


def textbook_mh(pi, Q):
    n = len(pi)
    P = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and Q[i, j] > 0:
                P[i, j] = Q[i, j] * min(1.0, pi[j] * Q[j, i] / (pi[i] * Q[i, j]))
        P[i, i] = 1.0 - P[i].sum()
    return P


# -- chain validation -------------------------------------------------------------------

@pytest.mark.parametrize("args,msg", [
    (([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], [0, 0]), "not a permutation"),
    (([0.5, 0.25, 0.25], np.full((3, 3), 1 / 3), [1, 2, 0]), "not an involution"),
    (([0.7, 0.3], [[0.5, 0.5], [0.5, 0.5]], [1, 0]), "s-invariant"),
    (([0.5, 0.6], [[0.5, 0.5], [0.5, 0.5]], [0, 1]), "sum to 1"),
    (([0.5, 0.5], [[0.5, 0.6], [0.5, 0.5]], [0, 1]), "rows summing"),
])
def test_finite_chain_validation(args, msg):
    with pytest.raises(FiniteChainError, match=msg):
        FiniteChain(np.array(args[0]), np.array(args[1]), np.array(args[2]))


# -- decomposition -------------------------------------------------------------------

def test_decomposition_symmetric_identity():
    Q = np.array([[0.2, 0.8, 0.0], [0.8, 0.1, 0.1], [0.0, 0.1, 0.9]])
    h, A, r = finite_nu_decomposition(FiniteChain(np.full(3, 1 / 3), Q, np.arange(3)))
    support = Q > 0
    np.testing.assert_allclose(h[support], 0.5)
    np.testing.assert_array_equal(A, support)
    np.testing.assert_allclose(r[A], 1.0)


def test_decomposition_two_state_swap():
    h, A, r = finite_nu_decomposition(FiniteChain(np.array([0.5, 0.5]), np.full((2, 2), 0.5),
                                                  np.array([1, 0])))
    np.testing.assert_array_equal(h, 0.5)
    assert A.all()
    np.testing.assert_array_equal(r, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=20), st.integers(min_value=0, max_value=10_000))
def test_density_ratio_reciprocal_property(n, seed):
    chain = random_finite_chain(n, np.random.default_rng(seed), sparsity=0.3)
    _, A, r = finite_nu_decomposition(chain)
    s = chain.s_perm
    rs = r[np.ix_(s, s)].T
    np.testing.assert_allclose((r * rs)[A], 1.0, rtol=1e-13)


# -- GMH construction ----------------------------------------------------------------

def test_gmh_uniform_is_proposal():
    chain = FiniteChain(np.array([0.5, 0.5]), np.full((2, 2), 0.5), np.array([1, 0]))
    for pol in (FLIP, STAY, OPTIMAL_FLIP):
        np.testing.assert_array_equal(finite_build_gmh(chain, METROPOLIS, pol), chain.Q)


def test_gmh_with_identity_involution_is_textbook_mh():
    chain = random_finite_chain(8, np.random.default_rng(3), s_perm=np.arange(8))
    P = finite_build_gmh(chain, METROPOLIS, STAY)
    np.testing.assert_allclose(P, textbook_mh(chain.pi, chain.Q), atol=1e-15)
    assert check_s_symmetry(chain, P) <= 1e-12


def test_gmh_rows_sum_to_one():
    chain = random_finite_chain(5, np.random.default_rng(4))
    for fn in (METROPOLIS, BARKER):
        for pol in (FLIP, OPTIMAL_FLIP):
            P = finite_build_gmh(chain, fn, pol)
            assert np.max(np.abs(P.sum(1) - 1)) <= 1e-14
            assert np.all(P >= 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=30), st.integers(min_value=0, max_value=10_000),
       st.sampled_from([METROPOLIS, BARKER]), st.sampled_from([FLIP, OPTIMAL_FLIP, STAY]),
       st.sampled_from([0.0, 0.3]))
def test_finite_pipeline_property(n, seed, fn, policy, zero_mass):
    rng = np.random.default_rng(seed)
    s = np.arange(n) if policy is STAY else None
    chain = random_finite_chain(n, rng, zero_mass_prob=zero_mass, sparsity=0.2, s_perm=s)
    assert policy_admissible(chain, fn, policy)
    rep = verify_finite_chain(chain, fn, policy)
    assert rep.passed, rep.lines()


def test_stay_policy_fails_without_admissibility():
    # find a chain with a nontrivial s where the stay masses differ across orbits
    rng = np.random.default_rng(0)
    for _ in range(50):
        chain = random_finite_chain(6, rng)
        if not policy_admissible(chain, METROPOLIS, STAY):
            break
    rep = verify_finite_chain(chain, METROPOLIS, STAY)
    assert not rep["stay_mass_s_invariant"].passed
    assert not rep["skew_detailed_balance"].passed


def test_optimal_flip_moves_least_mass():
    chain = random_finite_chain(10, np.random.default_rng(5))
    idx = np.arange(10)
    off_flip = finite_build_gmh(chain, METROPOLIS, FLIP)[idx, chain.s_perm]
    off_opt = finite_build_gmh(chain, METROPOLIS, OPTIMAL_FLIP)[idx, chain.s_perm]
    assert np.all(off_opt <= off_flip + 1e-15)


# -- checkers discriminate ----------------------------------------------------------------

def test_corrupted_kernel_is_flagged():
    chain = random_finite_chain(6, np.random.default_rng(6))
    P = finite_build_gmh(chain, METROPOLIS, FLIP)
    assert check_s_symmetry(chain, P) <= 1e-12
    bad = P.copy()
    bad[0, 1] += 1e-3
    bad[0, 0] -= 1e-3
    assert check_s_symmetry(chain, bad) >= 1e-4


def test_unit_acceptance_breaks_ratio_identity():
    chain = chain3()
    rep = check_acceptance_conditions(chain, np.ones((3, 3)))
    assert rep["zero_outside_A"].passed
    assert not rep["ratio_identity_on_A"].passed
    good = check_acceptance_conditions(chain, finite_alpha(chain, METROPOLIS))
    assert good.passed


def test_zero_acceptance_passes_vacuously():
    chain = chain3()
    assert check_acceptance_conditions(chain, np.zeros((3, 3))).passed
    P = finite_build_gmh(chain, METROPOLIS, STAY, alpha=np.zeros((3, 3)))
    np.testing.assert_array_equal(P, np.eye(3))


def test_invariance_examples():
    chain = chain3()
    assert check_invariance(chain, np.eye(3)) == 0.0
    shift = np.roll(np.eye(3), 1, axis=1)
    assert check_invariance(chain, shift) > 0.1
    assert check_invariance(chain, finite_build_gmh(chain, BARKER, STAY)) <= 1e-12


def test_support_conditions():
    pos = random_finite_chain(4, np.random.default_rng(1))
    assert check_support_conditions(pos).passed
    Q = np.full((3, 3), 1 / 3)
    Q[1] = [0.5, 0.5, 0.0]
    rep = check_support_conditions(FiniteChain(np.full(3, 1 / 3), Q, np.arange(3)))
    res = rep["proposal_positive_into_support"]
    assert not res.passed and "(i=1, j=2)" in res.detail
    # zero-mass state 2 proposes back to itself half the time
    Q = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.25, 0.25, 0.5]])
    rep = check_support_conditions(FiniteChain(np.array([0.5, 0.5, 0.0]), Q, np.arange(3)))
    leak = rep["zero_mass_states_enter_support"]
    assert not leak.passed and "state 2" in leak.detail


def test_irreducibility_witness():
    chain = random_finite_chain(6, np.random.default_rng(2))
    P = finite_build_gmh(chain, METROPOLIS, FLIP)
    k = irreducibility_witness(chain, P)
    assert k is not None and np.all(np.linalg.matrix_power(P, k) > 0)
    blocks = np.zeros((4, 4))
    blocks[:2, :2] = blocks[2:, 2:] = 0.5
    reducible = FiniteChain(np.full(4, 0.25), blocks, np.arange(4))
    assert irreducibility_witness(reducible, finite_build_gmh(reducible, METROPOLIS, STAY)) is None


def test_singular_parts_disjoint():
    chain = random_finite_chain(12, np.random.default_rng(8), sparsity=0.5)
    assert check_singular_parts(chain).passed


# -- lifted chains ----------------------------------------------------------------------

@pytest.mark.parametrize("fn", [METROPOLIS, BARKER])
def test_lifted_marginal_reversibility(fn):
    rng = np.random.default_rng(9)
    pi0 = rng.dirichlet(np.ones(5))
    qp = rng.dirichlet(np.ones(5), size=5)
    qm = rng.dirichlet(np.ones(5), size=5)
    assert check_lifted_marginal_reversibility(pi0, qp, qm, fn) <= 1e-15
    chain = lifted_finite_chain(pi0, qp, qm, rho=0.7)
    assert verify_finite_chain(chain, fn, FLIP).passed


# -- identities ---------------------------------------------------------------------

def test_acceptance_identity_checker():
    for fn in (METROPOLIS, BARKER):
        assert check_acceptance_identity(fn).passed
    squared = AcceptanceFunction("custom", lambda lt: np.exp(np.minimum(0.0, 2 * lt)))
    assert not check_acceptance_identity(squared)["balance_identity"].passed


def test_fd_log_jacobian_examples():
    z = np.array([0.3, -1.0, 2.0])
    assert abs(fd_log_jacobian(lambda u: u, z)) < 1e-9
    assert fd_log_jacobian(lambda u: 2.0 * u, z) == pytest.approx(3 * np.log(2), abs=1e-6)
    with pytest.raises(FloatingPointError, match="singular"):
        fd_log_jacobian(lambda u: np.stack([u[:, 0], u[:, 0], u[:, 2]], axis=1), z)


def test_nice_identities_zero_and_harmonic():
    phi = standard_normal_momentum(2)
    rep = check_nice_identities(zero_spec(2, 3, 0.5), phi, n_samples=10)
    assert rep.passed
    assert rep["involution_identity"].measured <= 1e-14
    h = 0.9 * max_step_size(0.5, 3)
    assert check_nice_identities(harmonic_spec(2, 3, h), phi, n_samples=20).passed


def test_nice_identities_flag_reversed_drift_violation():
    spec = random_nonnice_spec(2, 3, 0.1, seed=1)
    spec = spec.with_step(0.5 * max_step_size(spec.lipschitz_L, 3))
    rep = check_nice_identities(spec, standard_normal_momentum(2), n_samples=10)
    res = rep["involution_identity"]
    assert not res.passed and res.measured > 1e3 * res.tolerance


def test_nice_identities_need_certification():
    with pytest.raises(StepBoundError):
        check_nice_identities(harmonic_spec(1, 3, 2.0), standard_normal_momentum(1))


def test_lipschitz_refutation():
    f = SmoothMap.linear(np.diag([2.0, 0.5]))
    assert refutes_lipschitz(f, 1.0, 2)
    assert not refutes_lipschitz(f, 2.0, 2)


# -- chain files -----------------------------------------------------------------------

def test_chain_file_round_trip():
    chain = random_finite_chain(7, np.random.default_rng(11))
    back = parse_finite_chain(format_finite_chain(chain))
    np.testing.assert_array_equal(back.pi, chain.pi)
    np.testing.assert_array_equal(back.Q, chain.Q)
    np.testing.assert_array_equal(back.s_perm, chain.s_perm)


def test_chain_file_fractions():
    text = 'n = 2\npi = ["1/2", "1/2"]\ns_perm = [1, 0]\nQ = [["1/3", "2/3"], [0.5, 0.5]]\n'
    chain = parse_finite_chain(text)
    assert chain.Q[0, 0] == 1 / 3


@pytest.mark.parametrize("text,msg", [
    ("n = 2\npi = [0.5, 0.5]\ns_perm = [1, 1]\nQ = [[0.5, 0.5], [0.5, 0.5]]\n", "permutation"),
    ("n = 3\npi = [0.4, 0.3, 0.3]\ns_perm = [1, 2, 0]\nQ = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]\n",
     "involution"),
    ("n = 2\npi = [0.5, true]\ns_perm = [0, 1]\nQ = [[0.5, 0.5], [0.5, 0.5]]\n", "line 2"),
    ("n = 2\npi = [0.5, 0.5]\ns_perm = [0, 1]\n", "missing key 'Q'"),
    ("n = 2\npi = [0.5, 0.5\n", "parse error"),
    ("n = 2\npi = [0.5]\ns_perm = [0, 1]\nQ = [[0.5, 0.5], [0.5, 0.5]]\n", "need 2 entries"),
])
def test_chain_file_errors(text, msg):
    with pytest.raises(ChainFileError, match=msg):
        parse_finite_chain(text)


# -- suites ---------------------------------------------------------------------------

def test_finite_suite_passes_and_exercises_stay():
    rep = finite_suite()
    assert rep.passed, [c.line() for c in rep.failures]
    assert rep["stay_policy_instances"].measured > 0
    assert max(c.measured for c in rep.checks if c.name.endswith("skew_detailed_balance")) <= 1e-12


def test_identities_and_jacobian_suites_pass():
    for rep in (identities_suite(), jacobians_suite()):
        assert rep.passed, [c.line() for c in rep.failures]


def test_run_suite_rejects_unknown_name():
    with pytest.raises(ValueError, match="unknown suite"):
        run_suite("everything")


def test_user_chain_soft_checks_warn_only():
    Q = np.full((3, 3), 1 / 3)
    Q[0] = [0.5, 0.5, 0.0]
    rep = finite_suite(FiniteChain(np.full(3, 1 / 3), Q, np.arange(3)), n_instances=5)
    assert rep.passed
    warned = [c for c in rep.checks if not c.passed]
    assert warned and all(not c.hard for c in warned)
