"""Monte Carlo integration of Fokker-Planck equations by change of measure.

The density at a query point is written as a conditional expectation over
auxiliary paths started at that point and run backward to the initial time.
The auxiliary process is a driftless diffusion (overdamped case) or the
frictionless phase-space diffusion (underdamped case); the change of measure
to the controlled dynamics enters as an exponential path weight which is
accumulated step by step as a running cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import PhysicalParams, RandomStream, TimeGrid, increment_block
from .errors import DegenerateWeight, NonFiniteState, ZeroMass

# log weights below this never survive exponentiation in float64
_LOG_FLOOR = -745.0


@dataclass(frozen=True)
class WeightedEstimate:
    """Monte Carlo mean with its standard error and weight diagnostics."""

    mean: float
    std_error: float
    n_samples: int
    mean_weight: float
    weight_std_error: float = 0.0


@dataclass(frozen=True)
class DensityQuery:
    """A batch of pointwise density evaluations sharing one setup.

    eval_points has shape (n_points, d) for overdamped dynamics or
    (n_points, 2d) for phase-space dynamics. eval_time must be a node of
    grid; the backward integration runs from eval_time down to grid.t_start.
    point_offset shifts the stream keys so a batch can be split across
    workers without changing any draw.
    """

    eval_points: np.ndarray
    eval_time: float
    initial_density: Callable[[np.ndarray], np.ndarray]
    n_paths: int
    grid: TimeGrid
    params: PhysicalParams
    potential: object
    stream: RandomStream
    point_offset: int = 0

    def __post_init__(self):
        object.__setattr__(self, "eval_points",
                           np.atleast_2d(np.asarray(self.eval_points, dtype=float)))
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        self.grid.index_of(self.eval_time)


def _pooled_estimate(log_boundary, neg_g, neg_g_mart=None):
    """Combine per-path log boundary values and log path weights.

    neg_g is the log weight of the density representation; neg_g_mart is
    the log of the bare change-of-measure factor (an exact martingale in
    discrete time), reported as the mean_weight diagnostic. It defaults to
    neg_g when the two coincide.
    """
    if neg_g_mart is None:
        neg_g_mart = neg_g
    if neg_g.size and np.max(neg_g) < _LOG_FLOOR:
        raise DegenerateWeight("all path weights underflowed to zero")
    log_w = log_boundary + neg_g
    finite = log_w > _LOG_FLOOR
    if not finite.any():
        # boundary density vanishes on every sampled endpoint
        m = 0.0
        w = np.zeros_like(log_w)
    else:
        m = float(np.max(log_w[finite]))
        w = np.exp(np.where(finite, log_w - m, -np.inf))
    scale = np.exp(m)
    n = log_w.size
    mean = float(np.mean(w)) * scale
    std_error = float(np.std(w, ddof=1)) * scale / np.sqrt(n) if n > 1 else 0.0
    r_shift = float(np.max(neg_g_mart))
    r = np.exp(neg_g_mart - r_shift)
    mean_weight = float(np.mean(r)) * np.exp(r_shift)
    weight_se = float(np.std(r, ddof=1)) * np.exp(r_shift) / np.sqrt(n) if n > 1 else 0.0
    return WeightedEstimate(mean=mean, std_error=std_error, n_samples=n,
                            mean_weight=mean_weight, weight_std_error=weight_se)


def _backward_subgrid(query):
    k = query.grid.index_of(query.eval_time)
    return query.grid.up_to(k)


def density_overdamped(query: DensityQuery) -> list[WeightedEstimate]:
    """Density of the overdamped controlled diffusion at each query point.

    Paths of the free backward diffusion are sampled from each point; the
    Girsanov factor for the drifted measure is accumulated with the drift
    evaluated at the post-step state. All weights are handled in log space
    with max-subtraction before exponentiation.
    """
    sub = _backward_subgrid(query)
    params, pot = query.params, query.potential
    h = sub.h
    n = sub.n_steps
    amp = np.sqrt(2.0 * h * params.mu / params.beta)
    c_sq = h * params.mu * params.beta / 4.0
    c_cross = np.sqrt(h * params.mu * params.beta / 2.0)
    out = []
    for idx, point in enumerate(query.eval_points):
        eps = increment_block(query.stream, query.point_offset + idx,
                              query.n_paths, n, params.dim)
        q = np.broadcast_to(point, (query.n_paths, params.dim)).copy()
        g = np.zeros(query.n_paths)
        g_mart = np.zeros(query.n_paths)
        for i in range(n):
            e = eps[:, i]
            du_old = pot.grad(sub.node(n - i), q)
            g_mart += c_sq * np.einsum("...i,...i->...", du_old, du_old) \
                + c_cross * np.einsum("...i,...i->...", du_old, e)
            q = q - amp * e
            t_new = sub.node(n - 1 - i)
            du = pot.grad(t_new, q)
            g += c_sq * np.einsum("...i,...i->...", du, du) \
                + c_cross * np.einsum("...i,...i->...", du, e)
        if not (np.isfinite(q).all() and np.isfinite(g).all()):
            raise NonFiniteState("backward path or weight became non-finite")
        with np.errstate(divide="ignore"):
            log_p0 = np.log(np.maximum(query.initial_density(q), 0.0))
        out.append(_pooled_estimate(log_p0, -g, -g_mart))
    return out


def density_underdamped(query: DensityQuery) -> list[WeightedEstimate]:
    """Phase-space density of the underdamped controlled diffusion.

    The auxiliary process is the frictionless phase-space diffusion run
    backward; the change of measure to the Stokes-friction dynamics weighs
    paths by a running cost in the post-step momentum.
    """
    sub = _backward_subgrid(query)
    params, pot = query.params, query.potential
    h = sub.h
    n = sub.n_steps
    beta, tau, m = params.beta, params.tau, params.mass
    d = params.dim
    amp = np.sqrt(2.0 * h * m / (tau * beta))
    c_sq = h * beta / (4.0 * m * tau)
    c_cross = np.sqrt(h * beta / (2.0 * m * tau))
    out = []
    for idx, point in enumerate(query.eval_points):
        eps = increment_block(query.stream, query.point_offset + idx,
                              query.n_paths, n, d)
        q = np.broadcast_to(point[:d], (query.n_paths, d)).copy()
        p = np.broadcast_to(point[d:], (query.n_paths, d)).copy()
        g = np.zeros(query.n_paths)
        g_mart = np.zeros(query.n_paths)
        for i in range(n):
            e = eps[:, i]
            g_mart += c_sq * np.einsum("...i,...i->...", p, p) \
                + c_cross * np.einsum("...i,...i->...", p, e)
            t_old = sub.node(n - i)
            force = pot.grad(t_old, q)
            q = q - h * p / m
            p = p + h * force - amp * e
            g += c_sq * np.einsum("...i,...i->...", p, p) \
                + c_cross * np.einsum("...i,...i->...", p, e)
        if not (np.isfinite(q).all() and np.isfinite(p).all() and np.isfinite(g).all()):
            raise NonFiniteState("backward path or weight became non-finite")
        ends = np.concatenate([q, p], axis=-1)
        with np.errstate(divide="ignore"):
            log_p0 = np.log(np.maximum(query.initial_density(ends), 0.0))
        out.append(_pooled_estimate(log_p0, -g, -g_mart))
    return out


def box_smooth(values: np.ndarray, half_width: int) -> np.ndarray:
    """Moving average with window 2*half_width + 1 on a uniform grid.

    Windows are truncated at the edges and renormalized by the number of
    points actually covered.
    """
    values = np.asarray(values, dtype=float)
    if half_width < 0:
        raise ValueError("half_width must be nonnegative")
    if half_width == 0:
        return values.copy()
    kernel = np.ones(2 * half_width + 1)
    sums = np.convolve(values, kernel, mode="same")
    counts = np.convolve(np.ones_like(values), kernel, mode="same")
    return sums / counts


def normalize(values: np.ndarray, spacing: float) -> tuple[np.ndarray, float]:
    """Rescale a sampled density to unit mass; returns the prior mass too.

    Mass is the trapezoid-rule integral, a diagnostic that should come out
    near 1 for a correct estimator on a wide enough grid.
    """
    values = np.asarray(values, dtype=float)
    if (values < 0).any():
        raise ValueError("density values must be nonnegative")
    mass = float(np.trapezoid(values, dx=spacing))
    if mass <= 0.0:
        raise ZeroMass("sampled density has zero total mass")
    return values / mass, mass


def pool_estimates(parts: Sequence[WeightedEstimate]) -> WeightedEstimate:
    """Merge estimates of the same quantity from disjoint path batches."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to pool")
    ns = np.array([p.n_samples for p in parts], dtype=float)
    means = np.array([p.mean for p in parts])
    variances = np.array([(p.std_error * np.sqrt(p.n_samples)) ** 2 for p in parts])
    n = ns.sum()
    mean = float(np.sum(ns * means) / n)
    # Chan et al. pairwise-free pooled second moment
    m2 = np.sum(variances * (ns - 1)) + np.sum(ns * (means - mean) ** 2)
    var = m2 / (n - 1) if n > 1 else 0.0
    weight = float(np.sum(ns * np.array([p.mean_weight for p in parts])) / n)
    return WeightedEstimate(mean=mean, std_error=float(np.sqrt(var / n)),
                            n_samples=int(n), mean_weight=weight)
