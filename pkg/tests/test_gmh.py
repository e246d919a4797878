import numpy as np
import pytest

from skewmc.core import (BARKER, IDENTITY, METROPOLIS, MOMENTUM_FLIP, ExtendedState,
                         standard_normal_momentum)
from skewmc.gmh import (FLIP, OPTIMAL_FLIP, STAY, DensityProposal, DeterministicProposal,
                        RejectionPolicy, gmh_accept_density, gmh_accept_deterministic, gmh_step)
from skewmc.transforms import Diffeo, harmonic_spec, leapfrog_compose
from skewmc.verify import FiniteChain, finite_build_gmh


def log_std_normal(z):
    return float(-0.5 * np.sum(z.x ** 2))


def gaussian_walk(scale=1.0):
    def log_q(z, zp):
        return float(-0.5 * np.sum((zp.x - z.x) ** 2) / scale ** 2)

    def sample(z, rng):
        return z.replace(x=z.x + scale * rng.standard_normal(z.dim))

    return DensityProposal(log_q, sample)


# -- acceptance probabilities ------------------------------------------------------

def test_density_acceptance_reduces_to_mh():
    # symmetric q and s = id: proposal terms cancel
    for lp_z, lp_zp in ((0.0, -1.3), (-2.0, -0.5)):
        a = gmh_accept_density(lp_z, lp_zp, -0.7, -0.7, METROPOLIS)
        assert a == pytest.approx(min(1.0, np.exp(lp_zp - lp_z)))


def test_density_acceptance_gaussian_value():
    # N(0,1), z = 0, z' = 1
    a = gmh_accept_density(0.0, -0.5, -0.5, -0.5, METROPOLIS)
    assert a == pytest.approx(np.exp(-0.5))
    assert a == pytest.approx(0.6065306597126334, abs=1e-15)


def test_density_acceptance_zero_denominator():
    assert gmh_accept_density(-np.inf, 0.0, 0.0, 0.0, METROPOLIS) == 1.0
    assert gmh_accept_density(0.0, 0.0, -np.inf, 0.0, BARKER) == 1.0


def test_density_acceptance_rejects_nan():
    with pytest.raises(ValueError, match="nan"):
        gmh_accept_density(np.nan, 0.0, 0.0, 0.0, METROPOLIS)


def test_deterministic_acceptance_examples():
    assert gmh_accept_deterministic(-0.3, -0.3, 0.0, METROPOLIS) == 1.0
    # Phi(z) = 2 z at z = 1 under N(0,1): 2 exp(-2 + 0.5)
    a = gmh_accept_deterministic(-0.5, -2.0, np.log(2.0), METROPOLIS)
    assert a == pytest.approx(2 * np.exp(-1.5), rel=1e-14)
    assert a == pytest.approx(0.44626032029685964, abs=1e-15)
    assert gmh_accept_deterministic(-np.inf, -1.0, 0.0, METROPOLIS) == 1.0


# -- rejection policies -------------------------------------------------------------

def test_policy_weights():
    qa, qas = np.array([0.2, 0.7]), np.array([0.7, 0.2])
    a, b = FLIP.weights(qa)
    np.testing.assert_allclose(a, 0)
    np.testing.assert_allclose(b, 1 - qa)
    a, b = STAY.weights(qa)
    np.testing.assert_allclose(a, 1 - qa)
    np.testing.assert_allclose(b, 0)
    a, b = OPTIMAL_FLIP.weights(qa, qas)
    np.testing.assert_allclose(b, [0.5, 0.0])
    np.testing.assert_allclose(a, [0.3, 0.3])
    np.testing.assert_allclose(a + b, 1 - qa)
    with pytest.raises(ValueError):
        OPTIMAL_FLIP.weights(qa)
    with pytest.raises(ValueError):
        RejectionPolicy("sometimes")


def test_policy_masses_nonnegative_on_random_inputs():
    rng = np.random.default_rng(0)
    qa, qas = rng.random(1000), rng.random(1000)
    for pol in (FLIP, STAY, OPTIMAL_FLIP):
        a, b = pol.weights(qa, qas)
        assert np.all(a >= 0) and np.all(b >= 0)
        np.testing.assert_allclose(a + b, 1 - qa, atol=1e-15)


# -- one-step kernel ----------------------------------------------------------------

def test_step_accepts_with_probability_one():
    ident = Diffeo(2, lambda z: z, lambda z: z, lambda z: np.zeros(np.shape(z)[:-1]))
    z = ExtendedState([0.3], [0.4])
    rng = np.random.default_rng(0)
    for _ in range(20):
        nxt, acc = gmh_step(z, ident, MOMENTUM_FLIP, METROPOLIS, FLIP, rng,
                            lambda w: log_std_normal(w) - 0.5 * float(w.p @ w.p))
        assert acc and nxt.same_as(z)


def test_step_flip_policy_on_rejection_returns_s_of_z():
    # proposal into zero density: always rejected
    dead = DeterministicProposal(lambda z: (z.replace(x=z.x + 10.0), 0.0))

    def log_pi(w):
        return 0.0 if w.x[0] < 5 else -np.inf

    z = ExtendedState([0.0], [1.5])
    nxt, acc = gmh_step(z, dead, MOMENTUM_FLIP, METROPOLIS, FLIP, np.random.default_rng(1), log_pi)
    assert not acc and nxt.same_as(MOMENTUM_FLIP(z))
    nxt, acc = gmh_step(z, dead, MOMENTUM_FLIP, METROPOLIS, STAY, np.random.default_rng(1), log_pi)
    assert not acc and nxt.same_as(z)


def test_step_zero_density_skips_uniform():
    prop = DeterministicProposal(lambda z: (z.replace(x=z.x + 1.0), 0.0))
    rng = np.random.default_rng(3)
    state_before = rng.bit_generator.state
    nxt, acc = gmh_step(ExtendedState([0.0]), prop, IDENTITY, METROPOLIS, FLIP, rng,
                        lambda w: -np.inf if w.x[0] == 0.0 else 0.0)
    assert acc and nxt.x[0] == 1.0
    assert rng.bit_generator.state == state_before


def test_optimal_flip_needs_deterministic_proposal():
    with pytest.raises(ValueError, match="deterministic"):
        gmh_step(ExtendedState([0.0]), gaussian_walk(), IDENTITY, METROPOLIS, OPTIMAL_FLIP,
                 np.random.default_rng(0), log_std_normal)


def test_step_is_reproducible():
    def run(seed):
        rng = np.random.default_rng(seed)
        z = ExtendedState([0.0])
        out = []
        for _ in range(50):
            z, _ = gmh_step(z, gaussian_walk(), IDENTITY, METROPOLIS, FLIP, rng, log_std_normal)
            out.append(z.x[0])
        return out

    assert run(5) == run(5)


def test_density_step_matches_exact_kernel_on_two_states():
    # 2 states, uniform pi and Q, s = swap: alpha = 1 and the kernel equals Q
    chain = FiniteChain(np.array([0.5, 0.5]), np.full((2, 2), 0.5), np.array([1, 0]))
    P = finite_build_gmh(chain, METROPOLIS, FLIP)
    np.testing.assert_array_equal(P, chain.Q)

    def log_q(z, zp):
        return np.log(0.5)

    def sample(z, rng):
        return ExtendedState([float(rng.integers(0, 2))])

    prop = DensityProposal(log_q, sample)
    swap = type(IDENTITY).custom(lambda z: ExtendedState([1.0 - z.x[0]]))
    rng = np.random.default_rng(0)
    counts = np.zeros((2, 2))
    for start in (0, 1):
        for _ in range(4000):
            nxt, acc = gmh_step(ExtendedState([float(start)]), prop, swap, METROPOLIS, FLIP, rng,
                                lambda w: np.log(0.5))
            assert acc
            counts[start, int(nxt.x[0])] += 1
    freq = counts / counts.sum(1, keepdims=True)
    assert np.max(np.abs(freq - 0.5)) < 0.03


def test_deterministic_step_leaves_gaussian_invariant():
    spec = harmonic_spec(1, 3, 0.4, stiffness=0.5)
    phi_map = leapfrog_compose(spec)
    phi = standard_normal_momentum(1)
    rng = np.random.default_rng(7)

    def log_pi(w):
        return float(-0.5 * w.x @ w.x + phi.log_density(w.p))

    xs = []
    for _ in range(4000):
        z = ExtendedState(rng.standard_normal(1), rng.standard_normal(1))
        for pol in (FLIP, OPTIMAL_FLIP):
            nxt, _ = gmh_step(z, phi_map, MOMENTUM_FLIP, METROPOLIS, pol, rng, log_pi)
            xs.append(nxt.x[0])
    xs = np.array(xs)
    assert abs(xs.mean()) < 4 / np.sqrt(len(xs))
    assert abs(xs.var() - 1) < 4 * np.sqrt(2 / len(xs))
