import math
from itertools import product

import numpy as np
import pytest

from bagstls import datagen as dg
from bagstls.core import fit_restricted_ols
from bagstls.errors import ConstantColumn, DegenerateSpacing


def test_model1_noiseless():
    syn = dg.generate(dg.SyntheticSpec("model1", 40, sigma_noise=0.0, seed=1))
    X = syn.data.covariates
    assert X.shape == (40, 30)
    np.testing.assert_allclose(syn.data.response(0), X[:, 15:].sum(axis=1), atol=1e-12)
    assert syn.true_support() == tuple(range(15, 30))
    data, beta, supports = syn
    assert beta.shape == (30, 1) and supports == (tuple(range(15, 30)),)


def test_model2_covariance():
    syn = dg.generate(dg.SyntheticSpec("model2", 100_000, seed=2))
    emp = np.cov(syn.data.covariates, rowvar=False, bias=True)
    i, j = np.indices((30, 30))
    assert np.max(np.abs(emp - 0.3 ** np.abs(i - j))) < 0.02
    beta = syn.beta[:, 0]
    assert np.all(beta[:15] == 0) and np.all(beta[15:20] == 0.5)
    assert np.all(beta[20:25] == 1.5) and np.all(beta[25:] == 2.5)


def test_model3_library_and_targets():
    syn = dg.generate(dg.SyntheticSpec("model3", 50, sigma_noise=0.0, seed=3))
    X, z = syn.data.covariates, syn.latents
    assert X.shape == (50, 15)
    assert np.array_equal(X[:, 4], z[:, 0] * z[:, 1])
    assert np.all(X[:, 0] == 1.0)
    np.testing.assert_allclose(syn.data.responses, X @ syn.beta, atol=1e-10)
    assert syn.supports == ((1, 5), (1, 5))
    assert syn.data.column_names[5] == "z2^2"


def test_generators_deterministic():
    a = dg.generate(dg.SyntheticSpec("model2", 30, seed=7))
    b = dg.generate(dg.SyntheticSpec("model2", 30, seed=7))
    c = dg.generate(dg.SyntheticSpec("model2", 30, seed=8))
    assert np.array_equal(a.data.covariates, b.data.covariates)
    assert not np.array_equal(a.data.covariates, c.data.covariates)
    with pytest.raises(ValueError):
        dg.SyntheticSpec("model4", 10)


def test_library_printed_order():
    _, names = dg.poly_library(np.ones((3, 2)), 4)
    assert names == (
        "1", "z1", "z2", "z1^2", "z1 z2", "z2^2", "z1^3", "z1 z2^2", "z1^2 z2", "z2^3",
        "z1^4", "z1^3 z2", "z1^2 z2^2", "z1 z2^3", "z2^4",
    )
    theta, names = dg.poly_library(np.arange(6.0).reshape(3, 2), 0)
    assert names == ("1",) and np.all(theta == 1)


def test_library_matches_multiset_enumeration():
    z = np.random.default_rng(0).standard_normal((5, 3))
    theta, names = dg.poly_library(z, 3)
    # every exponent vector of total degree <= 3 exactly once
    brute = sorted(e for e in product(range(4), repeat=3) if sum(e) <= 3)
    got = sorted(dg.library_exponents(3, 3))
    assert got == brute
    for col, exps in enumerate(dg.library_exponents(3, 3)):
        expected = np.prod([z[:, i] ** e for i, e in enumerate(exps)], axis=0)
        np.testing.assert_allclose(theta[:, col], expected, rtol=1e-14)
    degrees = [sum(e) for e in dg.library_exponents(3, 3)]
    assert degrees == sorted(degrees)
    theta1, names1 = dg.poly_library(np.array([[2.0], [3.0]]), 3, var_names=["z"])
    assert names1 == ("1", "z", "z^2", "z^3")
    np.testing.assert_array_equal(theta1[1], [1, 3, 9, 27])
    assert len(names) == 20


def test_decoupled_exponential():
    params = (0.3, 0.0, -0.5, 0.0)
    t, s = dg.integrate_lotka_volterra(params, (2.0, 3.0), (0.0, 1.0))
    assert s[-1, 0] == pytest.approx(2.0 * math.exp(0.3), rel=1e-6)
    assert s[-1, 1] == pytest.approx(3.0 * math.exp(-0.5), rel=1e-6)
    traj = dg.simulate_lotka_volterra(params, (2.0, 3.0), (0.0, 1.0), 11, "uniform_grid")
    np.testing.assert_allclose(traj.states[:, 0], 2.0 * np.exp(0.3 * traj.times), rtol=1e-6)


def test_step_halving_converges():
    _, a = dg.integrate_lotka_volterra(step=1e-3)
    _, b = dg.integrate_lotka_volterra(step=5e-4)
    assert abs(a[-1, 0] - b[-1, 0]) < 1e-8 * abs(b[-1, 0])


def test_invariant_conserved_and_orbit_periodic():
    t, s = dg.integrate_lotka_volterra()
    V = dg.lotka_volterra_invariant(s)
    assert np.max(np.abs(V - V[0])) < 1e-4 * abs(V[0])
    u = s[:, 0]
    peaks = [i for i in range(1, len(u) - 1) if u[i - 1] < u[i] >= u[i + 1]]
    assert len(peaks) >= 2
    assert abs(u[peaks[1]] - u[peaks[0]]) < 0.01 * u[peaks[0]]


def test_blow_up_detected():
    from bagstls.errors import BlowUp

    with pytest.raises(BlowUp):
        dg.integrate_lotka_volterra((30.0, 0.0, 0.0, 0.0), (1.0, 1.0), (0.0, 2.0))


def test_simulation_sampling():
    traj = dg.simulate_lotka_volterra(n_points=200, seed=4)
    assert np.all(np.diff(traj.times) > 0)
    assert traj.times[0] >= 0 and traj.times[-1] <= 24
    np.testing.assert_allclose(traj.derivatives, dg.lotka_volterra_rhs(traj.states))
    grid = dg.simulate_lotka_volterra(n_points=5, sampling="uniform_grid")
    np.testing.assert_allclose(grid.times, [0, 6, 12, 18, 24])
    with pytest.raises(ValueError):
        dg.simulate_lotka_volterra(n_points=1)


def test_lognormal_noise():
    traj = dg.simulate_lotka_volterra(n_points=2000, seed=1)
    same = dg.add_lognormal_noise(traj, 0.0, seed=2)
    assert np.array_equal(same.noisy_states, traj.states)
    noisy = dg.add_lognormal_noise(traj, 0.1, seed=2)
    ratio = (noisy.noisy_states / traj.states).ravel()
    assert np.all(noisy.noisy_states > 0)
    se = ratio.std(ddof=1) / math.sqrt(ratio.size)
    assert abs(ratio.mean() - math.exp(0.005)) <= 3 * se


def test_finite_differences():
    t = np.sort(np.random.default_rng(0).uniform(0, 5, 40))
    lin = np.column_stack([3 * t + 1, -2 * t])
    np.testing.assert_allclose(dg.finite_difference_derivatives(t, lin), [[3, -2]] * 40, atol=1e-10)
    g = np.linspace(0, 2, 21)
    quad = (g ** 2)[:, None]
    d = dg.finite_difference_derivatives(g, quad)
    np.testing.assert_allclose(d[1:-1, 0], 2 * g[1:-1], atol=1e-12)
    s = np.linspace(0, 2 * math.pi, 1000)
    d = dg.finite_difference_derivatives(s, np.sin(s)[:, None])
    assert np.max(np.abs(d[:, 0] - np.cos(s))) < 1e-4
    with pytest.raises(DegenerateSpacing):
        dg.finite_difference_derivatives(np.array([0.0, 1.0, 1.0]), np.zeros((3, 1)))
    with pytest.raises(ValueError):
        dg.finite_difference_derivatives(np.array([0.0, 1.0]), np.zeros((2, 1)))


def test_normalized_recovery_exact_derivatives():
    traj = dg.simulate_lotka_volterra(n_points=500, seed=0)
    data = dg.build_discovery_dataset(traj, 2, "exact")
    s = traj.states.std(axis=0)
    np.testing.assert_allclose(traj.normalization_scales, s, rtol=1e-12)
    sup_u, sup_v = dg.lv_true_supports(2)
    assert [data.column_names[j] for j in sup_u] == ["u", "u v"]
    assert [data.column_names[j] for j in sup_v] == ["v", "u v"]
    cu = fit_restricted_ols(data, 0, sup_u).coefficients[list(sup_u)]
    cv = fit_restricted_ols(data, 1, sup_v).coefficients[list(sup_v)]
    got = np.array([cu[0], cu[1], cv[0], cv[1]])
    np.testing.assert_allclose(got, dg.LV_NORMALIZED, atol=0.02)
    exact = dg.lv_true_coefficients(2, s)
    np.testing.assert_allclose(got, [exact[sup_u[0], 0], exact[sup_u[1], 0],
                                     exact[sup_v[0], 1], exact[sup_v[1], 1]], rtol=1e-8)


def test_zero_trajectory_rejected():
    traj = dg.simulate_lotka_volterra(n_points=20, seed=0)
    from dataclasses import replace

    flat = replace(traj, noisy_states=np.zeros_like(traj.states))
    with pytest.raises(ConstantColumn):
        dg.build_discovery_dataset(flat)


def test_initial_condition_perturbation():
    a = dg.perturb_initial_condition((10.0, 5.0), 0.1, seed=3)
    assert a == dg.perturb_initial_condition((10.0, 5.0), 0.1, seed=3)
    assert a != (10.0, 5.0) and all(v > 0 for v in a)
    assert dg.perturb_initial_condition((10.0, 5.0), 0.0, seed=3) == (10.0, 5.0)
