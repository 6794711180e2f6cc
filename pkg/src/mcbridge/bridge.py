"""Two solvers for the minimum-KL bridge between assigned densities.

The reference solver factorizes the bridge density as a product of two heat
kernels' solutions and alternates boundary-ratio updates until the factors
are consistent with both marginals. The trainer follows the gradient
descent scheme: a polynomial Lagrange multiplier absorbs the terminal
constraint while a small network models the drift gradient and is
regressed toward the value-function gradient.

Only one spatial dimension is supported here; the estimators it delegates
to are general.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import PhysicalParams, RandomStream, TimeGrid, increment_block
from .errors import DivergedTraining, IllConditionedFit, ZeroDivisionOnGrid
from .fokker_planck import DensityQuery, density_overdamped
from .network import Adam, DriftNetwork, SGD
from .potentials import NetworkDrift, TabulatedDrift

DENSITY_FLOOR = 1e-12


@dataclass(frozen=True)
class BoundaryPair:
    """Initial and final densities e^{-beta U}/Z on a stated interval."""

    u_iota: object
    u_f: object
    beta: float
    interval: tuple
    n_quad: int = 4001

    def _density(self, potential):
        lo, hi = self.interval
        xs = np.linspace(lo, hi, self.n_quad)
        z = float(np.trapezoid(np.exp(-self.beta * potential.value(0.0, xs[:, None])), xs))

        def dens(q):
            q = np.asarray(q, dtype=float)
            pts = q if q.ndim > 1 else q[..., None]
            return np.exp(-self.beta * potential.value(0.0, pts)) / z

        return dens

    def density_iota(self):
        return self._density(self.u_iota)

    def density_f(self):
        return self._density(self.u_f)


@dataclass
class HalfBridgeState:
    """Gridded factor functions whose product is the bridge density."""

    times: np.ndarray
    xs: np.ndarray
    phi: np.ndarray       # (n_times, n_x)
    phi_hat: np.ndarray   # (n_times, n_x)
    n_iters: int

    def density(self):
        return self.phi * self.phi_hat


def heat_mc_solve(direction: str, boundary_values: np.ndarray, xs: np.ndarray,
                  heat_time: float, params: PhysicalParams, n_paths: int,
                  stream: RandomStream) -> np.ndarray:
    """Heat propagation of gridded boundary data by Monte Carlo averaging.

    Each output value is the sample mean of the boundary data over Gaussian
    displacements with variance 2 mu heat_time / beta; one shared draw per
    path keeps neighbouring grid points positively correlated. The boundary
    data is linearly interpolated and clamped outside the grid. direction
    only labels which factor is being propagated; the kernel is symmetric.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be forward or backward")
    if heat_time < 0:
        raise ValueError("heat_time must be nonnegative")
    if heat_time == 0.0:
        return np.asarray(boundary_values, dtype=float).copy()
    sigma = np.sqrt(2.0 * params.mu * heat_time / params.beta)
    z = stream.generator().standard_normal(n_paths)
    shifted = xs[:, None] + sigma * z[None, :]
    vals = np.interp(shifted, xs, boundary_values)
    return vals.mean(axis=1)


def _ratio(numer, denom, what):
    if np.any(denom <= 0.0) or not np.isfinite(denom).all():
        raise ZeroDivisionOnGrid(
            f"{what} is not strictly positive on the grid; widen the "
            "spatial interval or raise the path count")
    return numer / denom


def half_bridge_iterate(boundary: BoundaryPair, grid: TimeGrid,
                        xs: np.ndarray, params: PhysicalParams,
                        n_iters: int, n_paths: int, stream: RandomStream,
                        phi_init: Optional[np.ndarray] = None):
    """Alternating heat solves matching both marginals; returns the state
    and the implied drift as a TabulatedDrift.

    Each pass propagates the time-zero factor forward across the whole
    horizon, replaces the terminal factor by the boundary ratio, propagates
    it back, and renormalizes at the initial time. After the final pass the
    factors are tabulated on every grid node and the drift gradient is read
    off the backward factor by centered differences.
    """
    if n_iters < 1:
        raise ValueError("n_iters must be at least 1")
    xs = np.asarray(xs, dtype=float)
    horizon = grid.t_end - grid.t_start
    p_iota = boundary.density_iota()(xs)
    p_f = boundary.density_f()(xs)
    phi0 = np.ones_like(xs) if phi_init is None else np.asarray(phi_init, dtype=float)
    phi_hat0 = _ratio(p_iota, phi0, "initial-time backward factor")
    phi1 = None
    for it in range(n_iters):
        phi_hat1 = heat_mc_solve("forward", phi_hat0, xs, horizon, params,
                                 n_paths, stream.with_key(it, 0))
        phi1 = _ratio(p_f, phi_hat1, "final-time forward factor")
        phi0 = heat_mc_solve("backward", phi1, xs, horizon, params,
                             n_paths, stream.with_key(it, 1))
        phi_hat0 = _ratio(p_iota, phi0, "initial-time backward factor")

    times = grid.nodes()
    n_t = times.size
    phi = np.empty((n_t, xs.size))
    phi_hat = np.empty((n_t, xs.size))
    for k, t in enumerate(times):
        phi[k] = heat_mc_solve("backward", phi1, xs, grid.t_end - t, params,
                               n_paths, stream.with_key(n_iters, 2 * k))
        phi_hat[k] = heat_mc_solve("forward", phi_hat0, xs, t - grid.t_start,
                                   params, n_paths,
                                   stream.with_key(n_iters, 2 * k + 1))
    state = HalfBridgeState(times=times, xs=xs, phi=phi, phi_hat=phi_hat,
                            n_iters=n_iters)
    if np.any(phi <= 0.0):
        raise ZeroDivisionOnGrid("backward factor vanished on the grid")
    log_phi = np.log(phi)
    dlog = np.gradient(log_phi, xs, axis=1)
    drift = -(2.0 / params.beta) * dlog
    return state, TabulatedDrift(times, xs, drift)


@dataclass(frozen=True)
class LagrangeMultiplier:
    """Degree-6 polynomial terminal multiplier, coefficients ascending."""

    coeffs: np.ndarray
    domain: tuple

    @classmethod
    def zero(cls, domain):
        return cls(coeffs=np.zeros(7), domain=tuple(domain))

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        x = q[..., 0] if q.ndim > 1 else q
        return np.polynomial.polynomial.polyval(x, self.coeffs)


def lambda_update(lam: LagrangeMultiplier, points: np.ndarray,
                  p_tf: np.ndarray, p_f_values: np.ndarray,
                  gamma1: float) -> LagrangeMultiplier:
    """Gradient-ascent refit of the terminal multiplier.

    New targets are lambda(points) + gamma1 log(p_tf / P_f), with both
    densities floored to keep the logarithm finite in the tails.
    """
    points = np.asarray(points, dtype=float).ravel()
    num = np.maximum(np.asarray(p_tf, dtype=float), DENSITY_FLOOR)
    den = np.maximum(np.asarray(p_f_values, dtype=float), DENSITY_FLOOR)
    targets = lam(points) + gamma1 * np.log(num / den)
    deg = lam.coeffs.size - 1
    vander = np.polynomial.polynomial.polyvander(points, deg)
    if np.linalg.matrix_rank(vander) < deg + 1:
        raise IllConditionedFit("sample points do not determine the polynomial")
    coeffs, *_ = np.linalg.lstsq(vander, targets, rcond=None)
    return replace(lam, coeffs=coeffs)


def stationarity_residual(drift_values, grad_v_values, beta: float) -> float:
    """Root-mean-square optimality gap between the drift gradient and the
    value-function gradient scaled by 2/beta."""
    du = np.asarray(drift_values, dtype=float)
    dv = np.asarray(grad_v_values, dtype=float)
    return float(np.sqrt(np.mean((du - (2.0 / beta) * dv) ** 2)))


def _bel_grad_batch(net_drift, points, t_index, terminal_phi, grid: TimeGrid,
                    params: PhysicalParams, n_paths: int,
                    stream: RandomStream) -> np.ndarray:
    """Value-gradient estimates at many points sharing one path budget.

    One-dimensional batched version of the non-degenerate gradient
    estimator used inside the training loop, where per-point calls would be
    dominated by bookkeeping. The running cost is the bridge cost of the
    current drift.
    """
    sub = grid.from_node(t_index)
    h = sub.h
    n = sub.n_steps
    beta, mu = params.beta, params.mu
    amp = np.sqrt(2.0 * h * mu / beta)
    sqh = np.sqrt(h)
    n_pts = points.size
    eps = increment_block(stream, t_index, n_paths, n, n_pts)
    q = np.broadcast_to(points, (n_paths, n_pts)).copy()
    log_coc = np.zeros((n_paths, n_pts))
    iota2 = np.zeros((n_paths, n_pts))
    iota3 = np.zeros((n_paths, n_pts))
    c_run = beta * mu / 4.0
    for i in range(n):
        t_i = sub.node(i)
        e = eps[:, i]
        flat = q.ravel()
        tv = np.full(flat.size, t_i)
        du = net_drift.net.forward(tv, flat).reshape(q.shape)
        if i == 0:
            iota2 += sqh * e
        else:
            hess = net_drift.net.input_space_grad(tv, flat).reshape(q.shape)
            log_coc = log_coc - h * mu * hess
            iota2 = iota2 + sqh * e * np.exp(log_coc)
            iota3 = iota3 + (h / (t_i - sub.t_start)) * c_run * du ** 2 * iota2
        q = q - h * mu * du + amp * e
    payoff = terminal_phi(q.ravel()).reshape(q.shape)
    pref = np.sqrt(beta / (2.0 * mu))
    samples = pref * (payoff * iota2 / (sub.t_end - sub.t_start) + iota3)
    return samples.mean(axis=0)


@dataclass(frozen=True)
class TrainPhase:
    n_iters: int
    n_param_updates: int
    optimizer: str  # 'sgd' or 'adam'
    gamma1: float
    gamma2: float


@dataclass
class TrainDiagnostics:
    l1_gap: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    runtime: float = 0.0


def train(boundary: BoundaryPair, grid: TimeGrid, params: PhysicalParams,
          schedule, n_paths_fp: int, n_paths_bel: int, batch_size: int,
          stream: RandomStream, time_stride: int = 1,
          net: Optional[DriftNetwork] = None,
          lam: Optional[LagrangeMultiplier] = None,
          callback: Optional[Callable] = None):
    """Gradient-descent bridge solver; returns (network, multiplier,
    diagnostics).

    Per outer iteration: estimate the terminal density under the current
    network drift, lift the multiplier by the log density mismatch, take it
    as terminal value data, estimate the value gradient at every
    time_stride-th grid node, and regress the network toward 2/beta times
    that gradient with the phase's optimizer.
    """
    if not schedule:
        raise ValueError("schedule must contain at least one phase")
    lo, hi = boundary.interval
    if net is None:
        net = DriftNetwork.initialize(stream.with_key(0, 0))
    if lam is None:
        lam = LagrangeMultiplier.zero(boundary.interval)
    drift = NetworkDrift(net)
    p_f = boundary.density_f()
    p_iota = boundary.density_iota()
    diag = TrainDiagnostics()
    tick = _time.monotonic()
    diag_xs = np.linspace(lo, hi, 41)
    time_indices = list(range(0, grid.n_steps, time_stride))
    iteration = 0
    for phase_idx, phase in enumerate(schedule):
        for _ in range(phase.n_iters):
            iteration += 1
            it_stream = stream.with_key(1, iteration)
            rng = it_stream.with_key(0).generator()
            batch = np.sort(rng.uniform(lo, hi, batch_size))

            query = DensityQuery(batch[:, None], grid.t_end, p_iota,
                                 n_paths_fp, grid, params, drift,
                                 it_stream.with_key(1))
            p_tf = np.array([e.mean for e in density_overdamped(query)])
            lam = lambda_update(lam, batch, p_tf, p_f(batch), phase.gamma1)

            # value gradient under the current drift, terminal data lambda
            ts, qs, targets = [], [], []
            for k in time_indices:
                gv = _bel_grad_batch(drift, batch, k, lam, grid, params,
                                     n_paths_bel, it_stream.with_key(2))
                ts.append(np.full(batch.size, grid.node(k)))
                qs.append(batch)
                targets.append((2.0 / params.beta) * gv)
            ts = np.concatenate(ts)
            qs = np.concatenate(qs)
            targets = np.concatenate(targets)

            if phase.optimizer == "adam":
                opt = Adam(phase.gamma2)
            elif phase.optimizer == "sgd":
                opt = SGD(phase.gamma2)
            else:
                raise ValueError(f"unknown optimizer {phase.optimizer!r}")
            loss = 0.0
            for _ in range(phase.n_param_updates):
                if phase.gamma2 == 0.0:
                    loss, _, _ = net.param_grad(ts, qs, targets)
                    break
                loss, gw, gb = net.param_grad(ts, qs, targets)
                opt.step(net, gw, gb)

            # the terminal-gap diagnostic gets a larger path budget than the
            # training estimates: noise only ever inflates an L1 distance
            dq = DensityQuery(diag_xs[:, None], grid.t_end, p_iota,
                              5 * n_paths_fp, grid, params, drift,
                              it_stream.with_key(3))
            dens = np.array([e.mean for e in density_overdamped(dq)])
            gap = float(np.trapezoid(np.abs(dens - p_f(diag_xs)), diag_xs))
            pred = net.forward(ts, qs)
            resid = float(np.sqrt(np.mean((pred - targets) ** 2)))
            diag.l1_gap.append(gap)
            diag.residual.append(resid)
            diag.loss.append(loss)
            if callback is not None:
                callback(iteration, phase_idx, diag)
            if gap > 10.0 * diag.l1_gap[0]:
                raise DivergedTraining(
                    f"terminal gap {gap:.3g} exceeds 10x its initial value")
    diag.runtime = _time.monotonic() - tick
    return net, lam, diag


def save_checkpoint(path, net: DriftNetwork, lam: LagrangeMultiplier,
                    phase_index: int, iteration: int, base_seed: int):
    """Write a bit-exact training checkpoint as an npz archive."""
    arrays = {"lambda_coeffs": lam.coeffs,
              "lambda_domain": np.asarray(lam.domain, dtype=float),
              "phase_index": np.array(phase_index),
              "iteration": np.array(iteration),
              "base_seed": np.array(base_seed, dtype=np.uint64),
              "version": np.array(1)}
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"w{k}"] = w
        arrays[f"b{k}"] = b
    np.savez(path, **arrays)


def load_checkpoint(path):
    """Read a checkpoint; returns (net, lam, phase_index, iteration, seed)."""
    with np.load(path) as data:
        n_layers = sum(1 for k in data.files if k.startswith("w"))
        weights = [data[f"w{k}"] for k in range(n_layers)]
        biases = [data[f"b{k}"] for k in range(n_layers)]
        lam = LagrangeMultiplier(coeffs=data["lambda_coeffs"],
                                 domain=tuple(data["lambda_domain"]))
        return (DriftNetwork(weights, biases), lam,
                int(data["phase_index"]), int(data["iteration"]),
                int(data["base_seed"]))
