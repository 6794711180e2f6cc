"""Path integrators for all four dynamics kinds."""

import numpy as np
import pytest

from mcbridge import (NonFiniteState, PhysicalParams, QuadraticMatrix,
                      RandomStream, ZeroPotential, evolve, make_grid,
                      simulate)


def test_overdamped_forward_matches_ou_moments():
    """Linear drift: sample mean and variance track the exact OU solution."""
    params = PhysicalParams(beta=2.0, mu=0.5, dim=1)
    grid = make_grid(0.0, 1.0, 0.002)
    pot = QuadraticMatrix(np.array([[1.0]]))
    n = 20000
    rng = RandomStream(11)
    starts = np.full((n, 1), 1.0)
    eps = rng.normals((n, grid.n_steps, 1))
    states = evolve("overdamped-forward", pot, starts, grid, params, eps)
    end = states[:, -1, 0]
    # dq = -mu q dt + sqrt(2 mu / beta) dW
    mean = np.exp(-params.mu * 1.0)
    var = (1.0 - np.exp(-2.0 * params.mu)) / params.beta
    assert abs(end.mean() - mean) < 4.0 * end.std() / np.sqrt(n)
    assert abs(end.var() - var) < 0.01


def test_backward_free_is_time_reversed_noise():
    params = PhysicalParams(beta=1.0, mu=1.0, dim=1)
    grid = make_grid(0.0, 0.1, 0.05)
    eps = np.array([[[1.0], [-2.0]]])
    states = evolve("overdamped-backward-free", ZeroPotential(),
                    np.array([[0.0]]), grid, params, eps)
    amp = np.sqrt(2 * grid.h)
    # start stored at the final node, steps fill earlier nodes
    assert states[0, 2, 0] == 0.0
    assert states[0, 1, 0] == pytest.approx(-amp * 1.0)
    assert states[0, 0, 0] == pytest.approx(-amp * 1.0 + amp * 2.0)


def test_underdamped_forward_free_momentum_decay():
    params = PhysicalParams(beta=1.0, tau=0.5, mass=2.0, dim=1)
    grid = make_grid(0.0, 1.0, 0.001)
    starts = np.array([[0.0, 1.0]])
    eps = np.zeros((1, grid.n_steps, 1))
    states = evolve("underdamped-forward", ZeroPotential(), starts, grid,
                    params, eps)
    assert states[0, -1, 1] == pytest.approx(np.exp(-1.0 / params.tau),
                                             rel=5e-3)


def test_underdamped_backward_inverts_forward_without_noise():
    """The frictionless backward map undoes the frictionless forward map."""
    params = PhysicalParams(beta=1.0, tau=1e12, mass=1.0, dim=1)
    grid = make_grid(0.0, 0.5, 0.01)
    pot = QuadraticMatrix(np.array([[1.0]]))
    eps = np.zeros((1, grid.n_steps, 1))
    fwd = evolve("underdamped-forward", pot, np.array([[0.3, -0.2]]), grid,
                 params, eps)
    # the backward step order pairs force evaluations with the same nodes
    back = evolve("underdamped-backward", pot, fwd[:, -1], grid, params, eps)
    assert np.allclose(back[0, 0], fwd[0, 0], atol=5e-3)


def test_evolve_rejects_unknown_kind():
    params = PhysicalParams(beta=1.0)
    grid = make_grid(0.0, 0.1, 0.1)
    with pytest.raises(ValueError):
        evolve("sideways", ZeroPotential(), np.zeros((1, 1)), grid, params,
               np.zeros((1, 1, 1)))


def test_evolve_flags_blowup():
    params = PhysicalParams(beta=1.0, mu=1.0, dim=1)
    grid = make_grid(0.0, 200.0, 0.5)
    pot = QuadraticMatrix(np.array([[100.0]]))  # step far beyond stability
    with pytest.raises(NonFiniteState):
        evolve("overdamped-forward", pot, np.array([[1.0]]), grid, params,
               np.zeros((1, grid.n_steps, 1)))


def test_simulate_wraps_single_path():
    params = PhysicalParams(beta=1.0, mu=1.0, dim=2)
    grid = make_grid(0.0, 0.1, 0.01)
    ens = simulate("overdamped-forward", ZeroPotential(), [0.0, 0.0], grid,
                   params, RandomStream(5))
    assert ens.states.shape == (1, 11, 2)
    assert ens.increments.shape == (1, 10, 2)
    assert ens.direction == "forward"
