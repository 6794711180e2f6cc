"""Half-bridge reference solver, multiplier updates, and checkpoints."""

import numpy as np
import pytest

from mcbridge import (BoundaryPair, DriftNetwork, LagrangeMultiplier,
                      PhysicalParams, QuadraticMatrix, RandomStream,
                      gaussian_bridge, half_bridge_iterate, heat_mc_solve,
                      lambda_update, load_checkpoint, make_grid,
                      save_checkpoint, stationarity_residual)
from mcbridge.errors import ZeroDivisionOnGrid
from mcbridge.bridge import _ratio

PARAMS = PhysicalParams(beta=1.0, mu=1.0, dim=1)


def test_heat_mc_solve_matches_gaussian_convolution():
    xs = np.linspace(-6, 6, 241)
    boundary = np.exp(-0.5 * xs * xs) / np.sqrt(2 * np.pi)
    out = heat_mc_solve("forward", boundary, xs, 0.25, PARAMS, 200_000,
                        RandomStream(41))
    var = 1.0 + 2.0 * 0.25
    exact = np.exp(-0.5 * xs * xs / var) / np.sqrt(2 * np.pi * var)
    assert np.max(np.abs(out - exact)) < 0.004


def test_heat_mc_solve_zero_time_is_identity():
    xs = np.linspace(-1, 1, 11)
    vals = xs ** 2
    out = heat_mc_solve("backward", vals, xs, 0.0, PARAMS, 10,
                        RandomStream(42))
    assert np.array_equal(out, vals)


def test_ratio_flags_vanishing_denominator():
    with pytest.raises(ZeroDivisionOnGrid):
        _ratio(np.ones(3), np.array([1.0, 0.0, 1.0]), "factor")


def test_half_bridge_matches_gaussian_oracle():
    """Gaussian-to-Gaussian bridge marginals against the closed form."""
    horizon = 0.2
    grid = make_grid(0.0, horizon, 0.01)
    var0, var1 = 1.0, 1.69
    boundary = BoundaryPair(QuadraticMatrix(np.array([[1.0 / var0]])),
                            QuadraticMatrix(np.array([[1.0 / var1]])),
                            1.0, (-7.0, 7.0))
    xs = np.linspace(-7.0, 7.0, 281)
    state, drift = half_bridge_iterate(boundary, grid, xs, PARAMS, 8,
                                       30_000, RandomStream(43))
    oracle = gaussian_bridge(0.0, var0, 0.0, var1, PARAMS, horizon)
    for k, t in ((0, 0.0), (10, 0.1), (20, 0.2)):
        dens = state.phi[k] * state.phi_hat[k]
        mass = np.trapezoid(dens, xs)
        mean = np.trapezoid(dens * xs, xs) / mass
        var = np.trapezoid(dens * (xs - mean) ** 2, xs) / mass
        om, ov = oracle(t)
        assert mean == pytest.approx(om, abs=0.05)
        assert var == pytest.approx(ov, rel=0.05)


def test_half_bridge_pins_initial_marginal():
    """The product of factors at t=0 reproduces the initial density."""
    grid = make_grid(0.0, 0.1, 0.01)
    boundary = BoundaryPair(QuadraticMatrix(np.array([[1.0]])),
                            QuadraticMatrix(np.array([[0.5]])),
                            1.0, (-6.0, 6.0))
    xs = np.linspace(-6.0, 6.0, 241)
    state, _ = half_bridge_iterate(boundary, grid, xs, PARAMS, 6, 30_000,
                                   RandomStream(44))
    dens = state.phi[0] * state.phi_hat[0]
    dens = dens / np.trapezoid(dens, xs)
    target = boundary.density_iota()(xs)
    assert np.trapezoid(np.abs(dens - target), xs) < 0.05


def test_lambda_update_recovers_polynomial_shift():
    """With gamma1=1 and exact densities the update adds the exact log ratio."""
    lam = LagrangeMultiplier.zero((-2.0, 2.0))
    pts = np.linspace(-2, 2, 41)
    p_tf = np.exp(-0.5 * pts ** 2)
    p_f = np.exp(-0.5 * (pts ** 2) / 2.0)
    new = lambda_update(lam, pts, p_tf, p_f, 1.0)
    exact = np.log(p_tf / p_f)  # a quadratic, inside the degree-6 span
    assert np.allclose(new(pts), exact, atol=1e-8)


def test_lambda_update_respects_gamma():
    lam = LagrangeMultiplier.zero((-1.0, 1.0))
    pts = np.linspace(-1, 1, 21)
    ratio = np.exp(pts)
    new = lambda_update(lam, pts, ratio, np.ones_like(pts), 0.25)
    assert np.allclose(new(pts), 0.25 * pts, atol=1e-6)


def test_stationarity_residual_zero_at_optimum():
    grad_v = np.linspace(-1, 1, 11)
    drift = (2.0 / 3.0) * grad_v
    assert stationarity_residual(drift, grad_v, 3.0) == pytest.approx(0.0)


def test_stationarity_residual_scale():
    assert stationarity_residual(np.ones(4), np.zeros(4), 1.0) == 1.0


def test_checkpoint_roundtrip(tmp_path):
    net = DriftNetwork.initialize(RandomStream(45))
    lam = LagrangeMultiplier(coeffs=np.arange(7.0), domain=(-3.0, 3.0))
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, net, lam, phase_index=1, iteration=7, base_seed=99)
    net2, lam2, phase, it, seed = load_checkpoint(path)
    t = np.array([0.1])
    q = np.array([-0.4])
    assert net2.forward(t, q) == pytest.approx(net.forward(t, q))
    assert np.array_equal(lam2.coeffs, lam.coeffs)
    assert lam2.domain == lam.domain
    assert (phase, it, seed) == (1, 7, 99)
