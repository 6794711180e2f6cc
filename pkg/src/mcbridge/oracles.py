"""Independent ground-truth generators for validating the estimators.

Nothing here shares integration code with the Monte Carlo modules: moments
of linear systems come from a Runge-Kutta solve of the moment equations,
equilibrium densities from quadrature, bridge marginals from closed-form
Gaussian algebra, and gradients from finite differences of value estimates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import PhysicalParams, RandomStream, TimeGrid
from .errors import EmptyEnsemble, ZeroMass
from .fokker_planck import WeightedEstimate


@dataclass(frozen=True)
class OUSpec:
    """Linear (Ornstein-Uhlenbeck) overdamped system with Gaussian start."""

    stiffness: object  # (d, d) array or callable t -> (d, d)
    params: PhysicalParams
    mean0: np.ndarray
    cov0: np.ndarray
    t_start: float = 0.0

    def stiffness_at(self, t):
        m = self.stiffness(t) if callable(self.stiffness) else self.stiffness
        return np.atleast_2d(np.asarray(m, dtype=float))


def ou_moments(spec: OUSpec, t: float, n_rk4: int = 10_000):
    """Mean and covariance at time t from the moment ODEs, solved by RK4."""
    d = spec.params.dim
    mu, beta = spec.params.mu, spec.params.beta
    mean = np.asarray(spec.mean0, dtype=float).reshape(d).copy()
    cov = np.atleast_2d(np.asarray(spec.cov0, dtype=float)).copy()
    if t < spec.t_start:
        raise ValueError("t must not precede the initial time")
    span = t - spec.t_start
    if span == 0.0:
        return mean, cov
    dt = span / n_rk4
    eye = np.eye(d)

    def rhs(s, m, c):
        u = spec.stiffness_at(s)
        dm = -mu * u @ m
        dc = -mu * (u @ c + c @ u.T) + (2.0 * mu / beta) * eye
        return dm, dc

    s = spec.t_start
    for _ in range(n_rk4):
        k1m, k1c = rhs(s, mean, cov)
        k2m, k2c = rhs(s + dt / 2, mean + dt / 2 * k1m, cov + dt / 2 * k1c)
        k3m, k3c = rhs(s + dt / 2, mean + dt / 2 * k2m, cov + dt / 2 * k2c)
        k4m, k4c = rhs(s + dt, mean + dt * k3m, cov + dt * k3c)
        mean = mean + dt / 6 * (k1m + 2 * k2m + 2 * k3m + k4m)
        cov = cov + dt / 6 * (k1c + 2 * k2c + 2 * k3c + k4c)
        s += dt
    return mean, cov


def ou_density(spec: OUSpec, t: float, q, n_rk4: int = 10_000):
    """Gaussian density of the linear system at (t, q)."""
    mean, cov = ou_moments(spec, t, n_rk4)
    q = np.atleast_2d(np.asarray(q, dtype=float))
    d = mean.size
    diff = q - mean
    prec = np.linalg.inv(cov)
    norm = 1.0 / np.sqrt((2.0 * np.pi) ** d * np.linalg.det(cov))
    expo = -0.5 * np.einsum("ni,ij,nj->n", diff, prec, diff)
    out = norm * np.exp(expo)
    return out if out.size > 1 else float(out[0])


def equilibrium_quadrature(potential, beta: float, interval, n_nodes: int):
    """Normalized 1-D Gibbs density e^{-beta U} / Z with Z by trapezoid."""
    lo, hi = interval
    xs = np.linspace(lo, hi, n_nodes)
    vals = np.exp(-beta * potential.value(0.0, xs[:, None]))
    z = float(np.trapezoid(vals, xs))
    if not np.isfinite(z) or z <= 0.0:
        raise ZeroMass("partition function is not positive and finite")

    def density(q):
        q = np.asarray(q, dtype=float)
        return np.exp(-beta * potential.value(0.0, q[..., None])) / z

    return density


def histogram_density(potential, initial_sampler, grid: TimeGrid,
                      params: PhysicalParams, n_paths: int, bins: int,
                      stream: RandomStream):
    """Coarse forward-simulation density: evolve, bin, normalize.

    initial_sampler(rng, n) draws starting positions of shape (n, d).
    Returns (bin centers, density values) for d = 1.
    """
    if n_paths < 1:
        raise EmptyEnsemble("histogram needs at least one path")
    rng = stream.generator()
    q = np.asarray(initial_sampler(rng, n_paths), dtype=float)
    h = grid.h
    amp = np.sqrt(2.0 * h * params.mu / params.beta)
    for k in range(grid.n_steps):
        e = rng.standard_normal(q.shape)
        q = q - h * params.mu * potential.grad(grid.node(k), q) + amp * e
    counts, edges = np.histogram(q[:, 0], bins=bins)
    width = edges[1] - edges[0]
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, counts / (n_paths * width)


def finite_diff_gradient(f: Callable[[np.ndarray], WeightedEstimate], x,
                         step: float):
    """Central difference of a noisy scalar function, per component.

    f maps a state to a WeightedEstimate; the returned estimates carry the
    propagated standard error sqrt(SE+^2 + SE-^2) / (2 step).
    """
    x = np.asarray(x, dtype=float).ravel()
    out = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = step
        plus = f(x + e)
        minus = f(x - e)
        mean = (plus.mean - minus.mean) / (2.0 * step)
        se = np.sqrt(plus.std_error ** 2 + minus.std_error ** 2) / (2.0 * step)
        out.append(WeightedEstimate(mean=mean, std_error=se,
                                    n_samples=plus.n_samples + minus.n_samples,
                                    mean_weight=1.0))
    return out


@dataclass(frozen=True)
class _Gauss:
    """Unnormalized Gaussian exp(-lam (x - nu)^2 / 2), scale ignored.

    lam may be negative: the bridge factor functions are allowed to grow,
    only their product has to be a probability density.
    """

    lam: float
    nu: float

    def convolve(self, var):
        if var == 0.0:
            return self
        denom = 1.0 + self.lam * var
        if denom <= 0.0:
            raise ZeroMass("bridge factor is not heat-integrable")
        return _Gauss(lam=self.lam / denom, nu=self.nu)

    def divide_into(self, lam_num, nu_num):
        """Parameters of N(nu_num, 1/lam_num) / self."""
        lam = lam_num - self.lam
        if lam == 0.0:
            return _Gauss(lam=0.0, nu=0.0)
        nu = (lam_num * nu_num - self.lam * self.nu) / lam
        return _Gauss(lam=lam, nu=nu)


def gaussian_bridge(mean0: float, var0: float, mean1: float, var1: float,
                    params: PhysicalParams, horizon: float,
                    n_fixed_point: int = 500):
    """Closed-form 1-D bridge between Gaussians under a free-diffusion prior.

    Solves the two-factor system by alternating exact Gaussian updates and
    returns a callable t -> (mean, variance) of the bridge marginal.
    """
    dcoef = 2.0 * params.mu / params.beta  # prior kernel variance per unit time
    total = dcoef * horizon
    phi_hat0 = _Gauss(lam=1.0 / var0, nu=mean0)  # guess: phi_0 constant
    for _ in range(n_fixed_point):
        phi_hat1 = phi_hat0.convolve(total)
        phi1 = phi_hat1.divide_into(1.0 / var1, mean1)
        phi0 = phi1.convolve(total)
        new_hat0 = phi0.divide_into(1.0 / var0, mean0)
        delta = abs(new_hat0.lam - phi_hat0.lam) + abs(new_hat0.nu - phi_hat0.nu)
        phi_hat0 = new_hat0
        if delta < 1e-14:
            break
    phi1 = phi_hat0.convolve(total).divide_into(1.0 / var1, mean1)

    def marginal(t):
        if not 0.0 <= t <= horizon:
            raise ValueError("t outside the bridge horizon")
        fwd = phi_hat0.convolve(dcoef * t)
        bwd = phi1.convolve(dcoef * (horizon - t))
        lam = fwd.lam + bwd.lam
        if lam <= 0.0:
            raise ZeroMass("bridge marginal is not normalizable")
        mean = (fwd.lam * fwd.nu + bwd.lam * bwd.nu) / lam
        return mean, 1.0 / lam

    return marginal
