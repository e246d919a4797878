"""Acceptance criteria 1-11, each with its tolerance and runtime budget.

Every test records a one-line PASS/FAIL summary (printed at the end of the
session by ``conftest.py``, and immediately with ``pytest -s``).
"""

import math
import time

import numpy as np

from conftest import ACCEPTANCE_RESULTS
from reference_hmc import hmc_chain
from skewmc.core import BARKER, METROPOLIS, standard_normal_momentum
from skewmc.diagnostics import diagnose
from skewmc.gmh import FLIP
from skewmc.samplers import SamplerConfig, run_l2hmc, run_nice_full, run_sampler
from skewmc.targets import banana, gaussian_mixture
from skewmc.transforms import (compute_c0, harmonic_spec, hmc_spec, leapfrog_compose,
                               leapfrog_forward, leapfrog_l2hmc_spec, mala_map, max_step_size,
                               random_nice_spec, random_nonnice_spec, vartheta1)
from skewmc.transforms.nice_theory import g_inverse_fixed_point
from skewmc.verify import (FiniteChain, check_acceptance_identity, check_involution_identity,
                           check_nice1, check_nice_identities, check_s_symmetry,
                           check_support_conditions, finite_build_gmh, finite_suite,
                           jacobians_suite, random_finite_chain, stationarity_suite)
from skewmc.verify.finite import check_invariance


def record(n, passed, detail, elapsed, budget):
    ok = bool(passed) and elapsed < budget
    line = (f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}  "
            f"[{elapsed:.3g} s, budget {budget:g} s]")
    ACCEPTANCE_RESULTS[n] = (ok, line)
    print(line)
    assert passed, line
    assert elapsed < budget, line


def test_criterion_01_finite_space_exactness():
    t0 = time.perf_counter()
    rep = finite_suite(n_instances=100, max_n=50)
    elapsed = time.perf_counter() - t0
    worst = {key: max(c.measured for c in rep.checks if c.name.endswith(key))
             for key in ("skew_detailed_balance", "invariance")}
    conditions = [c for c in rep.checks
                if c.name.endswith(("zero_outside_A", "ratio_identity_on_A"))]
    conditions_ok = len(conditions) > 0 and all(c.passed for c in conditions)
    ok = rep.passed and conditions_ok and max(worst.values()) <= 1e-12
    record(1, ok, f"100 chains, s-symmetry {worst['skew_detailed_balance']:.1e}, "
                  f"invariance {worst['invariance']:.1e}", elapsed, 10.0)


def test_criterion_02_c0_constant():
    compute_c0.cache_clear()
    t0 = time.perf_counter()
    c0 = compute_c0()
    elapsed = time.perf_counter() - t0
    gap = abs(math.exp(c0 * vartheta1(c0)) - 2.0)
    record(2, 0.285 <= c0 <= 0.295 and gap <= 1e-9, f"c0 = {c0:.10f}, root gap {gap:.1e}",
           elapsed, 1e-3)


def test_criterion_03_volume_and_involution():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst_lj, worst_inv = 0.0, 0.0
    for m in (1, 2, 4, 8):
        spec = random_nice_spec(3, m, 0.3, seed=m, scale=0.4)
        z = rng.standard_normal((100, 6))
        worst_lj = max(worst_lj, float(np.max(np.abs(leapfrog_compose(spec).log_jac_forward(z)))))
        worst_inv = max(worst_inv, check_involution_identity(spec, n_samples=100, seed=m)
                        ["involution_identity"].measured)
    elapsed = time.perf_counter() - t0
    record(3, worst_lj == 0.0 and worst_inv <= 1e-8,
           f"max |log J| = {worst_lj:g}, involution gap {worst_inv:.1e}", elapsed, 1.0)


def test_criterion_04_jacobian_oracles():
    t0 = time.perf_counter()
    rep = jacobians_suite(dims=(2, 4, 6), n_points=20, rtol=1e-4)
    phi = standard_normal_momentum(2)
    sym = []
    for seed, spec in enumerate([harmonic_spec(2, 3, 0.9 * max_step_size(0.5, 3)),
                                 random_nice_spec(2, 4, 1.0, seed=7, scale=0.3,
                                                  base_stiffness=0.4)]):
        spec = spec.with_step(0.9 * max_step_size(spec.lipschitz_L, spec.m))
        sym.append(check_nice_identities(spec, phi, n_samples=20, seed=seed)
                   ["inverse_jacobian_symmetry"])
    elapsed = time.perf_counter() - t0
    lj_worst = max(c.measured for c in rep.checks if c.name.endswith("_vs_fd"))
    ok = rep.passed and all(c.passed and c.tolerance <= 1e-3 for c in sym)
    record(4, ok, f"worst log-J rel err {lj_worst:.1e}, inverse-Jacobian symmetry "
                  f"{max(c.measured for c in sym):.1e}", elapsed, 30.0)


def test_criterion_05_fixed_point_inversion():
    c0 = compute_c0()
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    worst_res, worst_it, worst_p = 0.0, 0, 0.0
    for i in range(100):
        d = int(rng.integers(1, 6))
        m = int(rng.integers(1, 9))
        spec = random_nice_spec(d, m, 1.0, seed=100 + i, scale=float(rng.uniform(0.1, 1.0)),
                                base_stiffness=float(rng.uniform(0.0, 2.0)))
        spec = spec.with_step(0.9 * c0 / (math.sqrt(spec.lipschitz_L) * m))
        x = 1.5 * rng.standard_normal(d)
        p = rng.standard_normal(d)
        y, _ = leapfrog_forward(spec, x, p)
        p_hat, it, res = g_inverse_fixed_point(spec, x, y, tol=1e-10, max_iter=200,
                                               full_output=True)
        worst_res, worst_it = max(worst_res, res), max(worst_it, it)
        worst_p = max(worst_p, float(np.max(np.abs(p_hat - p))))
    elapsed = time.perf_counter() - t0
    record(5, worst_res <= 1e-10 and worst_it <= 200,
           f"100 instances, max residual {worst_res:.1e}, max iterations {worst_it}, "
           f"max |p_hat - p| {worst_p:.1e}", elapsed, 5.0)


def test_criterion_06_classical_hmc_recovery():
    t = banana(2, 0.5)
    phi = standard_normal_momentum(2)
    x0 = np.array([0.5, -0.5])
    t0 = time.perf_counter()
    gaps = []
    for seed, (m, h) in enumerate([(5, 0.15), (1, 0.3), (10, 0.08)]):
        tr = run_nice_full(SamplerConfig("nice_full", 500, seed, x0=x0), t, phi, hmc_spec(t, m, h))
        ref = hmc_chain(t.log_prob, t.grad, x0, h, m, 500, seed=seed)
        gaps.append(float(np.max(np.abs(tr.xs - ref))))
        tr = run_l2hmc(SamplerConfig("l2hmc_original", 500, seed, x0=x0), t, phi,
                       leapfrog_l2hmc_spec(t, m, h))
        ref = hmc_chain(t.log_prob, t.grad, x0, h, m, 500, seed=seed, draw_direction=True)
        gaps.append(float(np.max(np.abs(tr.xs - ref))))
    elapsed = time.perf_counter() - t0
    record(6, max(gaps) <= 1e-10, f"6 traces x 500 steps, max coordinate gap {max(gaps):.1e}",
           elapsed, 10.0)


def test_criterion_07_stationarity():
    t0 = time.perf_counter()
    rep = stationarity_suite(n_chains=10_000, steps=(1, 5, 20))
    elapsed = time.perf_counter() - t0
    p_min = min(c.measured for c in rep.checks)
    record(7, rep.passed, f"{len(rep.checks)} KS tests at level 0.01, "
                          f"{len(rep.failures)} rejected, min p = {p_min:.3f}", elapsed, 300.0)


MIXTURE = gaussian_mixture([0.3, 0.7], [[-1.0, 0.0], [1.5, 0.5]], [1.0, 1.0])


def test_criterion_08_ergodic_averages():
    phi = standard_normal_momentum(2)
    exact = np.array([0.3 * -1.0 + 0.7 * 1.5, 0.7 * 0.5])
    t0 = time.perf_counter()
    z = {}
    for kind, transform, kw in [("nice_randomized", hmc_spec(MIXTURE, 3, 0.4), {"omega": 0.3}),
                                ("lifted_density", mala_map(MIXTURE, 0.6), {"omega": 0.2})]:
        g_minus = transform if kind == "lifted_density" else None
        tr = run_sampler(SamplerConfig(kind, 100_000, 21, **kw), MIXTURE, phi, transform,
                         g_minus=g_minus)
        rep = diagnose(tr)
        z[kind] = float(np.max(np.abs(rep.mean - exact) / rep.mcse))
    elapsed = time.perf_counter() - t0
    record(8, max(z.values()) < 5.0,
           ", ".join(f"{k} max |z| = {v:.2f}" for k, v in z.items()), elapsed, 120.0)


def test_criterion_09_acceptance_identity():
    check_acceptance_identity(METROPOLIS, n=10)  # warm up imports and caches
    t0 = time.perf_counter()
    reps = [check_acceptance_identity(fn, n=10_000, tol=1e-12) for fn in (METROPOLIS, BARKER)]
    elapsed = time.perf_counter() - t0
    worst = max(r["balance_identity"].measured for r in reps)
    record(9, all(r.passed for r in reps), f"worst relative error {worst:.1e}", elapsed, 0.01)


def test_criterion_10_position_space_ratio():
    h = 0.9 * max_step_size(0.5, 4)
    t0 = time.perf_counter()
    rep = check_nice_identities(harmonic_spec(2, 4, h), standard_normal_momentum(2),
                                n_samples=50, seed=10)
    elapsed = time.perf_counter() - t0
    res = rep["position_ratio_matches_extended"]
    record(10, res.passed and res.tolerance <= 1e-8,
           f"50 points, worst relative error {res.measured:.1e}", elapsed, 10.0)


def test_criterion_11_counterexamples_flagged():
    t0 = time.perf_counter()
    # drifts with N_{m+1-i} != M_i
    spec = random_nonnice_spec(2, 3, 0.1, seed=1)
    nice1 = check_nice1(spec)
    inv = check_involution_identity(spec)
    flagged_spec = not nice1.passed and not inv.passed
    # proposal with a structural zero into the support
    Q = np.full((3, 3), 1 / 3)
    Q[1] = [0.5, 0.5, 0.0]
    support = check_support_conditions(FiniteChain(np.full(3, 1 / 3), Q, np.arange(3)))
    res = support["proposal_positive_into_support"]
    flagged_chain = not res.passed and "(i=1, j=2)" in res.detail
    # GMH matrix with one transition perturbed
    chain = random_finite_chain(6, np.random.default_rng(6))
    P = finite_build_gmh(chain, METROPOLIS, FLIP)
    P[0, 1] += 1e-3
    P[0, 0] -= 1e-3
    skew, inv_gap = check_s_symmetry(chain, P), check_invariance(chain, P)
    flagged_kernel = skew >= 1e-4
    elapsed = time.perf_counter() - t0
    record(11, flagged_spec and flagged_chain and flagged_kernel,
           f"reversed-drift gap {nice1['N_reversed_equals_M'].measured:.2f}, "
           f"support violation at {res.detail.split('at ')[-1]}, "
           f"corrupted kernel skew {skew:.1e} (invariance {inv_gap:.1e})", elapsed, 1.0)
