import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skewmc.core import (BARKER, DIRECTION_FLIP, IDENTITY, METROPOLIS, MOMENTUM_FLIP,
                         AcceptanceFunction, ExtendedState, Involution, TargetDensity,
                         acceptance_value, direction_flip, log_mu, momentum_flip,
                         standard_normal_momentum)
from skewmc.targets import banana, funnel, gaussian, gaussian_mixture
from skewmc.verify import check_gradient, check_momentum_symmetry


def std_normal(dim=1):
    return TargetDensity(dim, lambda x: -0.5 * np.sum(np.asarray(x) ** 2, axis=-1),
                         lambda x: -np.asarray(x))


# -- acceptance functions ------------------------------------------------------------

def test_acceptance_examples():
    assert acceptance_value(METROPOLIS, 1.0) == 1.0
    assert acceptance_value(BARKER, 1.0) == 0.5
    assert acceptance_value(METROPOLIS, 0.5) == 0.5
    assert 2 * acceptance_value(METROPOLIS, 0.5) == acceptance_value(METROPOLIS, 2.0) == 1.0


def test_acceptance_at_zero_and_infinity():
    for fn in (METROPOLIS, BARKER):
        assert fn.evaluate(0.0) == 0.0
        assert fn.from_log(np.inf) == 1.0
        assert fn.from_log(-np.inf) == 0.0


def test_acceptance_log_path_does_not_overflow():
    assert METROPOLIS.from_log(1e6) == 1.0
    assert BARKER.from_log(1e6) == 1.0
    assert BARKER.from_log(-1e6) == 0.0


def test_acceptance_rejects_bad_input():
    with pytest.raises(ValueError, match="nan"):
        METROPOLIS.from_log(np.nan)
    with pytest.raises(ValueError, match="negative"):
        BARKER.evaluate(-1.0)
    with pytest.raises(ValueError):
        AcceptanceFunction("bogus")
    with pytest.raises(TypeError):
        acceptance_value(METROPOLIS)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-13.8, max_value=13.8))
def test_acceptance_identity_property(log_t):
    t = np.exp(log_t)
    for fn in (METROPOLIS, BARKER):
        lhs = t * fn.evaluate(1.0 / t)
        rhs = fn.evaluate(t)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(rhs), 1e-300)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.0, max_value=1e6))
def test_acceptance_bounds(t):
    m = METROPOLIS.evaluate(t)
    assert m == min(1.0, t)
    assert BARKER.evaluate(t) == pytest.approx(t / (1 + t), rel=1e-12, abs=1e-300)


def test_custom_acceptance_hook():
    # Barker written by hand as a logistic in log t
    fn = AcceptanceFunction("custom", lambda lt: 1.0 / (1.0 + np.exp(-lt)))
    assert fn.evaluate(3.0) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        AcceptanceFunction("custom")


# -- involutions ------------------------------------------------------------------

def test_momentum_flip_examples():
    z = ExtendedState([1.0, 2.0], [3.0, -4.0])
    out = momentum_flip(z)
    np.testing.assert_array_equal(out.x, [1.0, 2.0])
    np.testing.assert_array_equal(out.p, [-3.0, 4.0])
    assert momentum_flip(out).same_as(z)
    zero = ExtendedState([0.0], [0.0])
    assert np.array_equal(momentum_flip(zero).p, [0.0])


def test_direction_flip_examples():
    assert direction_flip(ExtendedState([1.0], v=1)).v == -1
    z = ExtendedState([1.0], [2.0], -1)
    out = direction_flip(z)
    assert out.v == 1 and np.array_equal(out.p, [2.0])
    assert direction_flip(out).same_as(z)


def test_flips_need_components():
    with pytest.raises(ValueError):
        momentum_flip(ExtendedState([1.0]))
    with pytest.raises(ValueError):
        direction_flip(ExtendedState([1.0], [1.0]))


def test_builtin_involutions_exact_on_random_states():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        z = ExtendedState(rng.standard_normal(3), rng.standard_normal(3), int(rng.choice([-1, 1])))
        for s in (IDENTITY, MOMENTUM_FLIP, DIRECTION_FLIP):
            assert s(s(z)).same_as(z)


def test_custom_involution_is_trusted():
    s = Involution.custom(lambda z: z.replace(x=-z.x))
    z = ExtendedState([2.0])
    assert s(s(z)).same_as(z)


def test_extended_state_validation():
    with pytest.raises(ValueError, match="momentum shape"):
        ExtendedState([1.0, 2.0], [1.0])
    with pytest.raises(ValueError, match="direction"):
        ExtendedState([1.0], v=0)


# -- densities -------------------------------------------------------------------

def test_log_mu_examples():
    t, phi = std_normal(1), standard_normal_momentum(1)
    assert log_mu(t, phi, [0.0], [0.0]) == 0.0
    assert log_mu(t, phi, [1.0], [0.0]) == -0.5
    dead = TargetDensity(1, lambda x: np.full(np.shape(x)[:-1], -np.inf))
    assert log_mu(dead, phi, [1.0], [0.0]) == -np.inf


def test_log_mu_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        log_mu(std_normal(2), standard_normal_momentum(2), [0.0], [0.0])


def test_nan_log_density_is_rejected():
    bad = TargetDensity(1, lambda x: np.full(np.shape(x)[:-1], np.nan))
    with pytest.raises(ValueError, match="invalid log-density"):
        bad.log_prob(np.zeros(1))


def test_zero_density_is_minus_inf_not_nan():
    f = funnel(2)
    assert np.isfinite(f.log_prob(np.array([5.0, 100.0])))
    t = TargetDensity(1, lambda x: np.where(np.asarray(x)[..., 0] > 0, 0.0, -np.inf))
    assert t.log_prob(np.array([-1.0])) == -np.inf


@pytest.mark.parametrize("target", [
    gaussian(3, mean=[1.0, -2.0, 0.5], cov_diag=[0.5, 2.0, 1.0]),
    gaussian_mixture([0.3, 0.7], [[-2.0, 0.0], [2.0, 1.0]], [0.7, 1.2]),
    banana(2, curvature=0.8),
    funnel(3, scale=1.5),
], ids=lambda t: t.name)
def test_zoo_gradients_match_finite_differences(target):
    rep = check_gradient(target, n_points=100, seed=1)
    assert rep.passed, rep.lines()


def test_standard_normal_momentum_symmetric_and_moments():
    phi = standard_normal_momentum(3)
    assert check_momentum_symmetry(phi).passed
    draws = phi.draw(np.random.default_rng(2), (20000,))
    assert draws.shape == (20000, 3)
    se = 1.0 / np.sqrt(20000)
    assert np.all(np.abs(draws.mean(0)) < 4 * se)
    assert np.all(np.abs(draws.var(0) - 1.0) < 4 * np.sqrt(2) * se)
