"""Weighted backward-path density estimators."""

import numpy as np
import pytest

from mcbridge import (DegenerateWeight, DensityQuery, OUSpec, PhysicalParams,
                      QuadraticMatrix, RandomStream, WeightedEstimate,
                      ZeroPotential, box_smooth, density_overdamped,
                      density_underdamped, make_grid, normalize, ou_density,
                      pool_estimates)
from mcbridge.errors import ZeroMass

PARAMS = PhysicalParams(beta=1.0, mu=1.0, dim=1)


def unit_gaussian(q):
    sq = np.einsum("ni,ni->n", q, q)
    return np.exp(-0.5 * sq) / (2 * np.pi) ** (q.shape[-1] / 2)


def test_free_diffusion_matches_heat_kernel():
    """With no potential the estimate is exact up to Monte Carlo error."""
    grid = make_grid(0.0, 0.5, 0.01)
    pts = np.array([[0.0], [0.8], [-1.6]])
    query = DensityQuery(pts, 0.5, unit_gaussian, 4000, grid, PARAMS,
                         ZeroPotential(), RandomStream(21))
    ests = density_overdamped(query)
    var = 1.0 + 2.0 * 0.5  # initial variance plus accumulated 2 mu t / beta
    for x, est in zip(pts[:, 0], ests):
        exact = np.exp(-0.5 * x * x / var) / np.sqrt(2 * np.pi * var)
        assert abs(est.mean - exact) < 3.5 * est.std_error
        assert abs(est.mean - exact) < 0.02


def test_quadratic_potential_matches_ou_oracle():
    grid = make_grid(0.0, 0.3, 0.005)
    pot = QuadraticMatrix(np.array([[1.0]]))
    pts = np.array([[0.0], [1.0]])
    query = DensityQuery(pts, 0.3, unit_gaussian, 6000, grid, PARAMS, pot,
                         RandomStream(22))
    spec = OUSpec(np.array([[1.0]]), PARAMS, np.zeros(1), np.eye(1))
    for pt, est in zip(pts, density_overdamped(query)):
        exact = ou_density(spec, 0.3, pt[None])
        assert abs(est.mean - exact) < 3.5 * est.std_error


def test_mean_weight_is_near_one():
    """The bare change-of-measure factor has unit expectation at any step."""
    grid = make_grid(0.0, 0.25, 0.025)
    pot = QuadraticMatrix(np.array([[2.0]]))
    query = DensityQuery(np.array([[0.5]]), 0.25, unit_gaussian, 8000, grid,
                         PARAMS, pot, RandomStream(23))
    est = density_overdamped(query)[0]
    assert abs(est.mean_weight - 1.0) < 3.0 * est.weight_std_error


def test_underdamped_free_matches_exact_gaussian():
    """Frictionless phase-space density against the hand-integrated kernel."""
    params = PhysicalParams(beta=1.0, tau=1.0, mass=1.0, dim=1)
    grid = make_grid(0.0, 0.4, 0.004)
    t = 0.4

    def initial(x):
        q, p = x[:, 0], x[:, 1]
        return np.exp(-0.5 * (q * q + p * p)) / (2 * np.pi)

    query = DensityQuery(np.array([[0.0, 1.0]]), t, initial, 6000, grid,
                         params, ZeroPotential(), RandomStream(24))
    est = density_underdamped(query)[0]

    # exact joint Gaussian of the linear system (free force, friction 1/tau)
    a = np.array([[0.0, 1.0], [0.0, -1.0]])
    cov = np.zeros((2, 2))
    mean = np.zeros(2)
    sq = np.eye(2)
    n_rk = 8000
    hh = t / n_rk
    noise = np.array([[0.0, 0.0], [0.0, 2.0]])
    for _ in range(n_rk):
        sq = sq + hh * a @ sq
        cov = cov + hh * (a @ cov + cov @ a.T + noise)
    cov = cov + sq @ np.eye(2) @ sq.T
    mean = sq @ np.zeros(2)
    diff = np.array([0.0, 1.0]) - mean
    exact = np.exp(-0.5 * diff @ np.linalg.solve(cov, diff)) / (
        2 * np.pi * np.sqrt(np.linalg.det(cov)))
    assert abs(est.mean - exact) < max(3.5 * est.std_error, 0.003)


def test_degenerate_weight_raises():
    grid = make_grid(0.0, 0.5, 0.05)
    pot = QuadraticMatrix(np.array([[1e8]]))
    query = DensityQuery(np.array([[1.0]]), 0.5, unit_gaussian, 50, grid,
                         PARAMS, pot, RandomStream(25))
    with pytest.raises(DegenerateWeight):
        density_overdamped(query)


def test_box_smooth_preserves_constants():
    assert np.allclose(box_smooth(np.full(9, 2.5), 2), 2.5)


def test_box_smooth_window():
    out = box_smooth(np.array([0.0, 3.0, 0.0]), 1)
    assert np.allclose(out, [1.5, 1.0, 1.5])


def test_normalize_unit_mass():
    xs = np.linspace(-5, 5, 201)
    vals = np.exp(-0.5 * xs * xs)
    dens, mass = normalize(vals, xs[1] - xs[0])
    assert mass == pytest.approx(np.sqrt(2 * np.pi), rel=1e-4)
    assert np.trapezoid(dens, xs) == pytest.approx(1.0, rel=1e-9)


def test_normalize_rejects_zero_mass():
    with pytest.raises(ZeroMass):
        normalize(np.zeros(5), 0.1)


def test_pool_estimates_matches_single_batch():
    rng = np.random.default_rng(0)
    x = rng.normal(3.0, 1.0, 1000)
    halves = []
    for part in (x[:400], x[400:]):
        halves.append(WeightedEstimate(
            mean=float(part.mean()),
            std_error=float(part.std(ddof=1) / np.sqrt(part.size)),
            n_samples=part.size, mean_weight=1.0))
    pooled = pool_estimates(halves)
    assert pooled.mean == pytest.approx(float(x.mean()))
    assert pooled.std_error == pytest.approx(
        float(x.std(ddof=1) / np.sqrt(x.size)), rel=1e-6)
    assert pooled.n_samples == 1000
