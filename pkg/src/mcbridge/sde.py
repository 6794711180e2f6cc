"""Euler-Maruyama integrators for the dynamics used by the estimators.

Four kinds of dynamics are supported:

``overdamped-forward``
    dq = -mu * dU(t, q) dt + sqrt(2 mu / beta) dw, state dimension d.
``overdamped-backward-free``
    driftless diffusion integrated from t_end down to t_start,
    q_new = q_old - sqrt(2 h mu / beta) eps.
``underdamped-forward``
    dq = p/m dt, dp = (-dU - p/tau) dt + sqrt(2 m / (tau beta)) dw,
    state dimension 2d laid out as (q, p).
``underdamped-backward``
    frictionless phase-space diffusion integrated backward,
    q_new = q_old - h p_old / m,
    p_new = p_old + h dU(t_old, q_old) - sqrt(2 m h / (tau beta)) eps.

Backward kinds return states in physical-time order (index 0 is t_start)
while increments stay in simulation order (index 0 is the first step taken).
"""

from __future__ import annotations

import numpy as np

from .core import PathEnsemble, PhysicalParams, RandomStream, TimeGrid, sample_increments
from .errors import NonFiniteState

FORWARD_KINDS = ("overdamped-forward", "underdamped-forward")
BACKWARD_KINDS = ("overdamped-backward-free", "underdamped-backward")
KINDS = FORWARD_KINDS + BACKWARD_KINDS


def _split_phase(states):
    d = states.shape[-1] // 2
    return states[..., :d], states[..., d:]


def evolve(kind, potential, starts, grid: TimeGrid, params: PhysicalParams,
           increments: np.ndarray) -> np.ndarray:
    """Integrate a batch of paths with supplied noise.

    Inputs
    ------
    starts : (n_paths, s) initial states, s = d or 2d by kind
    increments : (n_paths, n_steps, d) standard-normal draws, one per step

    Returns (n_paths, n_nodes, s) states in physical-time order.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown dynamics kind {kind!r}")
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    n_paths, s = starts.shape
    n = grid.n_steps
    h = grid.h
    beta, mu, tau, m = params.beta, params.mu, params.tau, params.mass
    states = np.empty((n_paths, n + 1, s))

    # unstable steps are reported as NonFiniteState below, so let the
    # intermediate arithmetic overflow silently instead of warning
    with np.errstate(over="ignore", invalid="ignore"):
        _fill_states(kind, potential, starts, grid, params, increments, states)

    if not np.isfinite(states).all():
        raise NonFiniteState(f"non-finite state while integrating {kind}")
    return states


def _fill_states(kind, potential, starts, grid, params, increments, states):
    n_paths, s = starts.shape
    n = grid.n_steps
    h = grid.h
    beta, mu, tau, m = params.beta, params.mu, params.tau, params.mass

    if kind == "overdamped-forward":
        amp = np.sqrt(2.0 * h * mu / beta)
        states[:, 0] = starts
        q = starts.copy()
        for k in range(n):
            q = q - h * mu * potential.grad(grid.node(k), q) + amp * increments[:, k]
            states[:, k + 1] = q
    elif kind == "overdamped-backward-free":
        amp = np.sqrt(2.0 * h * mu / beta)
        states[:, n] = starts
        q = starts.copy()
        for i in range(n):
            q = q - amp * increments[:, i]
            states[:, n - 1 - i] = q
    elif kind == "underdamped-forward":
        amp = np.sqrt(2.0 * h * m / (tau * beta))
        states[:, 0] = starts
        q, p = (a.copy() for a in _split_phase(starts))
        for k in range(n):
            force = potential.grad(grid.node(k), q)
            q, p = (q + h * p / m,
                    p - h * (force + p / tau) + amp * increments[:, k])
            states[:, k + 1] = np.concatenate([q, p], axis=-1)
    else:
        amp = np.sqrt(2.0 * h * m / (tau * beta))
        states[:, n] = starts
        q, p = (a.copy() for a in _split_phase(starts))
        for i in range(n):
            force = potential.grad(grid.node(n - i), q)
            q, p = (q - h * p / m,
                    p + h * force - amp * increments[:, i])
            states[:, n - 1 - i] = np.concatenate([q, p], axis=-1)


def simulate(kind, potential, start, grid: TimeGrid, params: PhysicalParams,
             stream: RandomStream) -> PathEnsemble:
    """Integrate a single path, drawing its noise from `stream`."""
    start = np.asarray(start, dtype=float).ravel()
    d = start.size // 2 if kind in ("underdamped-forward", "underdamped-backward") else start.size
    eps = sample_increments(grid, d, stream)[None]
    states = evolve(kind, potential, start[None], grid, params, eps)
    direction = "forward" if kind in FORWARD_KINDS else "backward"
    return PathEnsemble(grid=grid, states=states, increments=eps, direction=direction)
