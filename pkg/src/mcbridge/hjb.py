"""Value functions and their gradients by path-space Monte Carlo.

dynkin_value estimates the solution of a backward Kolmogorov equation with
running cost as the expectation of terminal data plus accumulated cost over
forward paths. The gradient estimators avoid differentiating the payoff:
the non-degenerate (position-only) case multiplies the payoff by a
stochastic integral of the linearized-flow cocycle, and the degenerate
phase-space case routes the perturbation through the momentum channel with
an explicitly constructed variational field.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import PhysicalParams, RandomStream, TimeGrid, increment_block
from .errors import DegenerateHorizon, HorizonTooShort, NonFiniteState, Unsupported
from .fokker_planck import WeightedEstimate


@dataclass(frozen=True)
class TerminalData:
    """Terminal payoff and optional running cost of a value function.

    phi maps terminal states (n, d or 2d) to (n,) payoffs; running_cost, if
    given, maps (time, states) to (n,) cost densities.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    running_cost: Optional[Callable[[float, np.ndarray], np.ndarray]] = None


def bridge_running_cost(potential, params: PhysicalParams, kind: str):
    """Running cost of the controlled-bridge value equation.

    (beta mu / 4) |dU|^2 for position-only dynamics and
    (tau beta / 4 m) |dU|^2 for phase-space dynamics, evaluated on the
    position block of the state.
    """
    if kind == "overdamped":
        c = params.beta * params.mu / 4.0
        d = params.dim

        def cost(t, x):
            du = potential.grad(t, x[..., :d])
            return c * np.einsum("...i,...i->...", du, du)
    elif kind == "underdamped":
        c = params.tau * params.beta / (4.0 * params.mass)
        d = params.dim

        def cost(t, x):
            du = potential.grad(t, x[..., :d])
            return c * np.einsum("...i,...i->...", du, du)
    else:
        raise ValueError(f"unknown dynamics kind {kind!r}")
    return cost


def _mc_estimate(samples: np.ndarray) -> WeightedEstimate:
    n = samples.size
    se = float(np.std(samples, ddof=1)) / np.sqrt(n) if n > 1 else 0.0
    return WeightedEstimate(mean=float(np.mean(samples)), std_error=se,
                            n_samples=n, mean_weight=1.0)


def _forward_subgrid(grid: TimeGrid, t: float) -> TimeGrid:
    return grid.from_node(grid.index_of(t))


def dynkin_value(x, t, kind, potential, terminal: TerminalData,
                 grid: TimeGrid, params: PhysicalParams, n_paths: int,
                 stream: RandomStream, point_index: int = 0) -> WeightedEstimate:
    """Value of the backward Kolmogorov problem at (x, t).

    kind is 'overdamped' or 'underdamped'; x has dimension d or 2d
    accordingly. Paths run forward from t to the end of the grid.
    """
    sub = _forward_subgrid(grid, t)
    h = sub.h
    n = sub.n_steps
    d = params.dim
    x = np.asarray(x, dtype=float).ravel()
    beta, mu, tau, m = params.beta, params.mu, params.tau, params.mass
    eps = increment_block(stream, point_index, n_paths, n, d)
    cost = np.zeros(n_paths)
    if kind == "overdamped":
        amp = np.sqrt(2.0 * h * mu / beta)
        q = np.broadcast_to(x, (n_paths, d)).copy()
        for i in range(n):
            t_i = sub.node(i)
            if terminal.running_cost is not None:
                cost += h * terminal.running_cost(t_i, q)
            q = q - h * mu * potential.grad(t_i, q) + amp * eps[:, i]
        ends = q
    elif kind == "underdamped":
        amp = np.sqrt(2.0 * h * m / (tau * beta))
        q = np.broadcast_to(x[:d], (n_paths, d)).copy()
        p = np.broadcast_to(x[d:], (n_paths, d)).copy()
        for i in range(n):
            t_i = sub.node(i)
            state = np.concatenate([q, p], axis=-1)
            if terminal.running_cost is not None:
                cost += h * terminal.running_cost(t_i, state)
            force = potential.grad(t_i, q)
            q, p = (q + h * p / m,
                    p - h * (force + p / tau) + amp * eps[:, i])
        ends = np.concatenate([q, p], axis=-1)
    else:
        raise ValueError(f"unknown dynamics kind {kind!r}")
    if not np.isfinite(ends).all():
        raise NonFiniteState("forward path became non-finite")
    return _mc_estimate(terminal.phi(ends) + cost)


def grad_value_overdamped(q0, t, potential, terminal: TerminalData,
                          grid: TimeGrid, params: PhysicalParams,
                          n_paths: int, stream: RandomStream,
                          point_index: int = 0) -> list[WeightedEstimate]:
    """Gradient of the value function for position-only dynamics.

    The payoff is multiplied by a stochastic integral of the linearized-flow
    cocycle; the running-cost contribution uses the same integral restricted
    to [t, s] with its 1/(s - t) normalization, the s == t term excluded.
    Returns one estimate per spatial component.
    """
    sub = _forward_subgrid(grid, t)
    h = sub.h
    n = sub.n_steps
    if n < 2:
        raise HorizonTooShort("gradient estimation needs at least 2 steps")
    d = params.dim
    beta, mu = params.beta, params.mu
    amp = np.sqrt(2.0 * h * mu / beta)
    pref = np.sqrt(beta / (2.0 * mu))
    eps = increment_block(stream, point_index, n_paths, n, d)
    q = np.broadcast_to(np.asarray(q0, dtype=float).ravel(),
                        (n_paths, d)).copy()
    scalar = d == 1
    if scalar:
        log_coc = np.zeros(n_paths)
    else:
        coc = np.broadcast_to(np.eye(d), (n_paths, d, d)).copy()
    iota2 = np.zeros((n_paths, d))
    iota3 = np.zeros((n_paths, d))
    sqh = np.sqrt(h)
    for i in range(n):
        t_i = sub.node(i)
        e = eps[:, i]
        if i == 0:
            iota2 += sqh * e
        else:
            hess = potential.hessian(t_i, q)
            if scalar:
                log_coc = log_coc - h * mu * hess[:, 0, 0]
                iota2 = iota2 + sqh * e * np.exp(log_coc)[:, None]
            else:
                coc = coc - h * mu * np.einsum("nij,njk->nik", hess, coc)
                iota2 = iota2 + sqh * np.einsum("nji,nj->ni", coc, e)
            if terminal.running_cost is not None:
                f = terminal.running_cost(t_i, q)
                iota3 = iota3 + (h / (t_i - sub.t_start)) * f[:, None] * iota2
        q = q - h * mu * potential.grad(t_i, q) + amp * e
    if not np.isfinite(q).all():
        raise NonFiniteState("forward path became non-finite")
    payoff = terminal.phi(q)[:, None]
    samples = pref * (payoff * iota2 / (sub.t_end - sub.t_start) + iota3)
    return [_mc_estimate(samples[:, k]) for k in range(d)]


@dataclass(frozen=True)
class VariationalField:
    """Momentum-channel perturbation field for the degenerate gradient.

    ell interpolates from the direction v at the start time to zero at the
    end; g is the matching position response, vanishing at both ends. h is
    the field paired with the noise in the gradient representation.
    """

    v: np.ndarray
    t: float
    t_f: float
    tau: float
    mass: float

    def ell(self, u):
        tf, t = self.t_f, self.t
        return self.v * (tf - u) * (tf + 2.0 * t - 3.0 * u) / (tf - t) ** 2

    def ell_dot(self, u):
        tf, t = self.t_f, self.t
        return self.v * (6.0 * u - 4.0 * tf - 2.0 * t) / (tf - t) ** 2

    def g(self, u):
        tf, t = self.t_f, self.t
        return self.v * (tf - u) ** 2 * (u - t) / (self.mass * (tf - t) ** 2)

    def h(self, u, hessian=None):
        """Field value at time u; hessian is the (d, d) curvature at the
        path position (omit or pass None for zero curvature)."""
        out = -self.ell_dot(u) - self.ell(u) / self.tau
        if hessian is not None:
            out = out - np.asarray(hessian) @ self.g(u)
        return out


def variational_field(v, t: float, t_f: float, tau: float = 1.0,
                      mass: float = 1.0) -> VariationalField:
    """Construct the cubic momentum-channel field on [t, t_f]."""
    if t_f <= t:
        raise DegenerateHorizon("variational field needs t_f > t")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return VariationalField(v=v, t=t, t_f=t_f, tau=tau, mass=mass)


def grad_value_underdamped(x0, t, potential, terminal: TerminalData,
                           grid: TimeGrid, params: PhysicalParams,
                           n_paths: int, stream: RandomStream,
                           direction: str = "momentum",
                           point_index: int = 0) -> WeightedEstimate:
    """Momentum derivative of the phase-space value function at (x0, t).

    The noise is paired with the variational field built on [t, T], where T
    is t_f for the terminal term and the running time s for each running
    cost contribution. Expanding the field in powers of the path time turns
    the nested sums into seven running prefix sums, keeping the cost linear
    in the number of steps.
    """
    if direction != "momentum":
        raise Unsupported("only the momentum direction is implemented")
    sub = _forward_subgrid(grid, t)
    h = sub.h
    n = sub.n_steps
    if n < 1:
        raise HorizonTooShort("gradient estimation needs at least 1 step")
    d = params.dim
    beta, tau, m = params.beta, params.tau, params.mass
    v = np.zeros(d)
    v[0] = 1.0
    amp = np.sqrt(2.0 * h * m / (tau * beta))
    sqh = np.sqrt(h)
    t0 = sub.t_start
    x0 = np.asarray(x0, dtype=float).ravel()
    eps = increment_block(stream, point_index, n_paths, n, d)
    q = np.broadcast_to(x0[:d], (n_paths, d)).copy()
    p = np.broadcast_to(x0[d:], (n_paths, d)).copy()

    # prefix sums of u^k <eps, v> and u^k <eps, Hess v>
    A = [np.zeros(n_paths) for _ in range(3)]
    B = [np.zeros(n_paths) for _ in range(4)]
    cost_total = np.zeros(n_paths)
    c_run = tau * beta / (4.0 * m)

    def window_sum(T):
        """Sum of sqrt(h) eps_j . h(u_j, t0, T) over steps so far."""
        poly_a = ((T * T + 2.0 * t0 * T - tau * (4.0 * T + 2.0 * t0)) * A[0]
                  + (6.0 * tau - 4.0 * T - 2.0 * t0) * A[1] + 3.0 * A[2])
        poly_b = (-t0 * T * T * B[0] + (T * T + 2.0 * t0 * T) * B[1]
                  - (2.0 * T + t0) * B[2] + B[3])
        return -(poly_a + (tau / m) * poly_b) / (tau * (T - t0) ** 2)

    for i in range(n):
        t_i = sub.node(i)
        # evaluate the field polynomial at the step midpoint; a left-point
        # rule leaves an O(h) bias in the terminal pairing
        u_i = t_i + 0.5 * h
        e = eps[:, i]
        a = sqh * np.einsum("ni,i->n", e, v)
        hess_v = np.einsum("nij,j->ni", potential.hessian(t_i, q), v)
        b = sqh * np.einsum("ni,ni->n", e, hess_v)
        for k in range(3):
            A[k] += a * u_i ** k
        for k in range(4):
            B[k] += b * u_i ** k
        if i > 0:
            du = potential.grad(t_i, q)
            f = np.einsum("ni,ni->n", du, du)
            cost_total += h * f * window_sum(t_i)
        force = potential.grad(t_i, q)
        q, p = (q + h * p / m,
                p - h * (force + p / tau) + amp * e)
    if not (np.isfinite(q).all() and np.isfinite(p).all()):
        raise NonFiniteState("forward path became non-finite")
    ends = np.concatenate([q, p], axis=-1)
    samples = np.sqrt(tau * beta / (2.0 * m)) * (
        terminal.phi(ends) * window_sum(sub.t_end) + c_run * cost_total)
    return _mc_estimate(samples)
