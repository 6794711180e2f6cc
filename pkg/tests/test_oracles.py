"""Independent reference solutions used to validate the estimators."""

import numpy as np
import pytest

from mcbridge import (DoubleWell, OUSpec, PhysicalParams, QuadraticMatrix,
                      RandomStream, WeightedEstimate, ZeroPotential,
                      equilibrium_quadrature, finite_diff_gradient,
                      gaussian_bridge, histogram_density, make_grid,
                      ou_density, ou_moments)

PARAMS = PhysicalParams(beta=1.0, mu=1.0, dim=1)


def test_ou_moments_scalar_closed_form():
    """dq = -mu k q dt + sqrt(2 mu/beta) dW has exponential moments."""
    params = PhysicalParams(beta=2.0, mu=0.5, dim=1)
    spec = OUSpec(np.array([[3.0]]), params, np.array([1.0]),
                  np.array([[0.25]]))
    t = 0.8
    mean, cov = ou_moments(spec, t)
    rate = params.mu * 3.0
    m_exact = np.exp(-rate * t)
    v_exact = (0.25 - 1.0 / (3.0 * params.beta)) * np.exp(-2 * rate * t) \
        + 1.0 / (3.0 * params.beta)
    assert mean[0] == pytest.approx(m_exact, rel=1e-5)
    assert cov[0, 0] == pytest.approx(v_exact, rel=1e-4)


def test_ou_density_normalization():
    spec = OUSpec(np.array([[1.0]]), PARAMS, np.zeros(1), np.eye(1))
    xs = np.linspace(-6, 6, 601)
    dens = np.array([ou_density(spec, 0.4, [[x]]) for x in xs])
    assert np.trapezoid(dens, xs) == pytest.approx(1.0, rel=1e-4)


def test_equilibrium_quadrature_gaussian():
    pot = QuadraticMatrix(np.array([[1.0]]))
    dens = equilibrium_quadrature(pot, 1.0, (-8.0, 8.0), 4001)
    xs = np.array([0.0, 1.0])
    exact = np.exp(-0.5 * xs ** 2) / np.sqrt(2 * np.pi)
    assert np.allclose(dens(xs), exact, rtol=1e-6)


def test_histogram_density_tracks_free_diffusion():
    grid = make_grid(0.0, 0.5, 0.005)

    def sampler(rng, n):
        return rng.standard_normal((n, 1))

    centers, dens = histogram_density(ZeroPotential(), sampler, grid, PARAMS,
                                      200_000, 60, RandomStream(51))
    var = 1.0 + 2.0 * 0.5
    exact = np.exp(-0.5 * centers ** 2 / var) / np.sqrt(2 * np.pi * var)
    assert np.max(np.abs(dens - exact)) < 0.01


def test_finite_diff_gradient_exact_on_quadratic():
    def f(x):
        return WeightedEstimate(mean=float(x[0] ** 2), std_error=0.01,
                                n_samples=100, mean_weight=1.0)

    est = finite_diff_gradient(f, [1.5], 1e-3)[0]
    assert est.mean == pytest.approx(3.0, abs=1e-6)
    assert est.std_error == pytest.approx(np.sqrt(2) * 0.01 / 2e-3)


def test_gaussian_bridge_hits_both_marginals():
    oracle = gaussian_bridge(0.0, 1.0, 0.5, 2.0, PARAMS, 0.3)
    m0, v0 = oracle(0.0)
    m1, v1 = oracle(0.3)
    assert (m0, v0) == (pytest.approx(0.0, abs=1e-8),
                        pytest.approx(1.0, rel=1e-8))
    assert (m1, v1) == (pytest.approx(0.5, abs=1e-8),
                        pytest.approx(2.0, rel=1e-8))


def test_gaussian_bridge_interpolates_monotonically():
    oracle = gaussian_bridge(0.0, 1.0, 1.0, 1.0, PARAMS, 0.2)
    means = [oracle(t)[0] for t in np.linspace(0, 0.2, 9)]
    assert all(b >= a - 1e-12 for a, b in zip(means, means[1:]))


def test_gaussian_bridge_free_limit_spreads():
    """Matching a wide target requires variance to grow along the bridge."""
    oracle = gaussian_bridge(0.0, 0.5, 0.0, 3.0, PARAMS, 0.5)
    variances = [oracle(t)[1] for t in np.linspace(0, 0.5, 6)]
    assert all(b >= a for a, b in zip(variances, variances[1:]))


def test_double_well_equilibrium_is_bimodal():
    dens = equilibrium_quadrature(DoubleWell(), 4.0, (-3.0, 3.0), 2001)
    assert dens(np.array([1.0]))[0] > dens(np.array([0.0]))[0]
