"""Desk-scale validation scenarios runnable as one command.

Each criterion pits an estimator against an independent oracle or closed
form at a scale that finishes on a workstation. The same runners back the
command line's oracle-check subcommand and the acceptance test suite.
"""

from __future__ import annotations

import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bridge import BoundaryPair, TrainPhase, half_bridge_iterate, train
from .core import PhysicalParams, RandomStream, make_grid
from .fokker_planck import (DensityQuery, box_smooth, density_overdamped,
                            density_underdamped)
from .hjb import (TerminalData, bridge_running_cost, dynkin_value,
                  grad_value_overdamped, grad_value_underdamped)
from .network import DriftNetwork
from .oracles import (OUSpec, equilibrium_quadrature, finite_diff_gradient,
                      gaussian_bridge, ou_density)
from .potentials import (DoubleWell, MonomialGrad, QuadraticMatrix,
                         QuarticShift, ZeroPotential)


@dataclass
class CriterionResult:
    cid: str
    passed: bool
    measured: str
    expected: str
    runtime: float


def _density_points(query: DensityQuery, workers: int):
    """Evaluate a density query, optionally splitting points over processes.

    The stream keying is by global point index, so any split reproduces the
    single-process draws exactly.
    """
    n = len(query.eval_points)
    if workers <= 1 or n == 1:
        return density_overdamped(query)
    chunks = []
    bounds = np.linspace(0, n, workers + 1).astype(int)
    for a, b in zip(bounds[:-1], bounds[1:]):
        if a == b:
            continue
        sub = DensityQuery(query.eval_points[a:b], query.eval_time,
                           query.initial_density, query.n_paths, query.grid,
                           query.params, query.potential, query.stream,
                           point_offset=query.point_offset + int(a))
        chunks.append(sub)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(density_overdamped, chunks))
    return [e for part in parts for e in part]


def standard_normal_density(q):
    """Unit Gaussian density of a position batch, any dimension."""
    q = np.asarray(q, dtype=float)
    d = q.shape[-1]
    sq = np.einsum("ni,ni->n", q, q)
    return np.exp(-0.5 * sq) / (2 * np.pi) ** (d / 2)


def shifted_normal_density(q):
    """1-D Gaussian with mean 0.5 and unit variance."""
    d = np.asarray(q, dtype=float)[:, 0] - 0.5
    return np.exp(-0.5 * d * d) / np.sqrt(2 * np.pi)


def ac1_quartic_relaxation(seed=20_240_101, workers=1, n_paths=1500):
    """Relaxation of a quartic oscillator toward its Gibbs equilibrium."""
    t0 = time.monotonic()
    params = PhysicalParams(beta=1.0, mu=1.0, dim=1)
    grid = make_grid(0.0, 0.75, 1e-3)
    pot = MonomialGrad()
    xs = np.linspace(-3.0, 3.0, 41)
    query = DensityQuery(xs[:, None], 0.75, standard_normal_density, n_paths,
                         grid, params, pot, RandomStream(seed))
    ests = _density_points(query, workers)
    dens = box_smooth(np.array([e.mean for e in ests]), 1)
    target = equilibrium_quadrature(pot, 1.0, (-6.0, 6.0), 10_001)(xs)
    l1 = float(np.trapezoid(np.abs(dens - target), xs))
    return CriterionResult("AC1", l1 <= 0.05, f"L1 = {l1:.4f}",
                           "L1 <= 0.05", time.monotonic() - t0)


def ac2_degenerate_gradient(seed=20_240_102, workers=1):
    """Analytic momentum gradient of the frictionless value function."""
    t0 = time.monotonic()
    params = PhysicalParams(beta=1.0, mu=1.0, tau=1.0, mass=1.0, dim=1)
    grid = make_grid(0.0, 1.0, 0.01)
    terminal = TerminalData(phi=lambda x: x[:, 1])
    est = grad_value_underdamped([0.0, 1.0], 0.0, ZeroPotential(), terminal,
                                 grid, params, 100_000, RandomStream(seed))
    target = np.exp(-1.0)
    tol = max(0.02, 3.0 * est.std_error)
    err = abs(est.mean - target)
    return CriterionResult(
        "AC2", err <= tol,
        f"estimate {est.mean:.5f} (SE {est.std_error:.5f}), |err| = {err:.5f}",
        f"|estimate - {target:.5f}| <= {tol:.5f}", time.monotonic() - t0)


def ac3_martingale(seed=20_240_103, workers=1):
    """Unit mean of the bare change-of-measure factor."""
    t0 = time.monotonic()
    params = PhysicalParams(beta=1.0, mu=1.0, dim=1)
    grid = make_grid(0.0, 0.2, 0.005)
    query = DensityQuery(np.array([[0.2]]), 0.2, lambda q: np.ones(len(q)),
                         10_000, grid, params, DoubleWell(),
                         RandomStream(seed))
    est = density_overdamped(query)[0]
    err = abs(est.mean_weight - 1.0)
    tol = 3.0 * est.weight_std_error
    return CriterionResult(
        "AC3", err <= tol,
        f"mean weight {est.mean_weight:.5f} (SE {est.weight_std_error:.5f})",
        f"|mean weight - 1| <= {tol:.5f}", time.monotonic() - t0)


def ac4_bel_vs_finite_difference(seed=20_240_104, workers=1):
    """Position-space gradient estimator against differenced values."""
    t0 = time.monotonic()
    params = PhysicalParams(beta=1.0, mu=1.0, dim=1)
    grid = make_grid(0.0, 0.2, 0.005)
    pot = DoubleWell()
    terminal = TerminalData(phi=lambda q: q[:, 0] ** 2,
                            running_cost=bridge_running_cost(pot, params,
                                                             "overdamped"))
    stream = RandomStream(seed)
    points = np.linspace(-2.0, 2.0, 11)
    hits = 0
    for k, q in enumerate(points):
        bel = grad_value_overdamped([q], 0.0, pot, terminal, grid, params,
                                    20_000, stream.with_key(0), point_index=k)[0]

        def value(x, _k=k):
            return dynkin_value(x, 0.0, "overdamped", pot, terminal, grid,
                                params, 100_000, stream.with_key(1, _k))

        fd = finite_diff_gradient(value, [q], 1e-2)[0]
        tol = 3.0 * np.sqrt(bel.std_error ** 2 + fd.std_error ** 2)
        if abs(bel.mean - fd.mean) <= tol:
            hits += 1
    return CriterionResult("AC4", hits >= 10, f"{hits}/11 points agree",
                           ">= 10/11 within 3 combined SE",
                           time.monotonic() - t0)


def ac5_ou_equivalence(seed=20_240_105, workers=1):
    """Linear-drift density against the moment-equation oracle."""
    t0 = time.monotonic()
    params = PhysicalParams(beta=1.0, mu=1.0, dim=1)
    grid = make_grid(0.0, 0.5, 0.002)
    pot = QuadraticMatrix(np.array([[1.0]]))
    xs = np.linspace(-2.0, 2.0, 11)
    query = DensityQuery(xs[:, None], 0.5, shifted_normal_density, 10_000,
                         grid, params, pot, RandomStream(seed))
    ests = _density_points(query, workers)
    spec = OUSpec(np.array([[1.0]]), params, np.array([0.5]),
                  np.array([[1.0]]))
    worst = 0.0
    ok = True
    for x, est in zip(xs, ests):
        ref = ou_density(spec, 0.5, [[x]])
        dev = abs(est.mean - ref) / max(est.std_error, 1e-300)
        worst = max(worst, dev)
        ok = ok and dev <= 3.0
    return CriterionResult("AC5", ok, f"worst deviation {worst:.2f} SE",
                           "<= 3 SE at 11 points", time.monotonic() - t0)


def ac6_maxwell_boltzmann(seed=20_240_106, workers=1):
    """Invariance of the momentum marginal at equilibrium."""
    t0 = time.monotonic()
    params = PhysicalParams(beta=1.0, mu=1.0, tau=1.0, mass=1.0, dim=1)
    grid = make_grid(0.0, 0.5, 0.01)

    def initial(x):
        q, p = x[:, 0], x[:, 1]
        return np.exp(-0.5 * (q * q + p * p)) / (2 * np.pi)

    qs = np.linspace(-5.0, 5.0, 41)
    dq = qs[1] - qs[0]
    ok = True
    report = []
    stream = RandomStream(seed)
    for j, p in enumerate((-1.0, 0.0, 1.0)):
        pts = np.column_stack([qs, np.full_like(qs, p)])
        query = DensityQuery(pts, 0.5, initial, 4000, grid, params,
                             ZeroPotential(), stream,
                             point_offset=j * len(qs))
        ests = density_underdamped(query)
        vals = np.array([e.mean for e in ests])
        ses = np.array([e.std_error for e in ests])
        marginal = float(np.trapezoid(vals, dx=dq))
        weights = np.full_like(ses, dq)
        weights[0] = weights[-1] = dq / 2
        se = float(np.sqrt(np.sum((weights * ses) ** 2)))
        target = np.exp(-0.5 * p * p) / np.sqrt(2 * np.pi)
        dev = abs(marginal - target) / se
        report.append(f"p={p:+.0f}: {dev:.2f} SE")
        ok = ok and dev <= 3.0
    return CriterionResult("AC6", ok, "; ".join(report),
                           "momentum marginal within 3 SE of equilibrium",
                           time.monotonic() - t0)


def _fig2_boundary(span=3.5):
    return BoundaryPair(QuarticShift(), DoubleWell(), 1.0, (-span, span))


def ac7_half_bridge(seed=20_240_107, workers=1):
    """Boundary attainment of the iterative reference solver."""
    t0 = time.monotonic()
    params = PhysicalParams(beta=1.0, mu=1.0, dim=1)
    grid = make_grid(0.0, 0.2, 0.005)
    boundary = _fig2_boundary()
    xs = np.linspace(-3.5, 3.5, 141)
    stream = RandomStream(seed)
    _, drift = half_bridge_iterate(boundary, grid, xs, params, 10, 40_000,
                                   stream)
    eval_xs = np.linspace(-3.0, 3.0, 41)
    query = DensityQuery(eval_xs[:, None], 0.2, boundary.density_iota(),
                         2000, grid, params, drift, stream.with_key(99))
    dens = np.array([e.mean for e in density_overdamped(query)])
    gap = float(np.trapezoid(np.abs(dens - boundary.density_f()(eval_xs)),
                             eval_xs))
    return CriterionResult("AC7", gap <= 0.1, f"L1 = {gap:.4f}",
                           "L1(p_tf, P_f) <= 0.1", time.monotonic() - t0)


def ac8_gaussian_bridge(seed=20_240_108, workers=1):
    """Iterative solver against the closed-form Gaussian bridge."""
    t0 = time.monotonic()
    params = PhysicalParams(beta=1.0, mu=1.0, dim=1)
    horizon = 0.2
    grid = make_grid(0.0, horizon, 0.005)
    var0, var1 = 1.0, 2.25
    boundary = BoundaryPair(QuadraticMatrix([[1.0 / var0]]),
                            QuadraticMatrix([[1.0 / var1]]), 1.0, (-8.0, 8.0))
    xs = np.linspace(-8.0, 8.0, 321)
    state, _ = half_bridge_iterate(boundary, grid, xs, params, 10, 40_000,
                                   RandomStream(seed))
    oracle = gaussian_bridge(0.0, var0, 0.0, var1, params, horizon)
    ok = True
    report = []
    for t, k in ((0.0, 0), (horizon / 2, grid.n_steps // 2),
                 (horizon, grid.n_steps)):
        dens = state.phi[k] * state.phi_hat[k]
        mass = np.trapezoid(dens, xs)
        mean = float(np.trapezoid(dens * xs, xs) / mass)
        var = float(np.trapezoid(dens * (xs - mean) ** 2, xs) / mass)
        om, ov = oracle(t)
        dev_m = abs(mean - om)
        dev_v = abs(var - ov) / ov
        report.append(f"t={t:.2f}: dmean {dev_m:.3f}, dvar {100 * dev_v:.1f}%")
        ok = ok and dev_m <= 0.05 * np.sqrt(ov) and dev_v <= 0.05
    return CriterionResult("AC8", ok, "; ".join(report),
                           "moments within 5% at t in {0, T/2, T}",
                           time.monotonic() - t0)


def ac9_trainer(seed=20_240_109, workers=1):
    """Gradient-descent bridge solver at a reduced two-phase schedule."""
    t0 = time.monotonic()
    params = PhysicalParams(beta=1.0, mu=1.0, dim=1)
    grid = make_grid(0.0, 0.2, 0.005)
    boundary = _fig2_boundary(2.5)
    schedule = [TrainPhase(10, 600, "adam", 1.0, 3e-3),
                TrainPhase(10, 600, "adam", 0.3, 1e-3)]
    net, lam, diag = train(boundary, grid, params, schedule,
                           n_paths_fp=800, n_paths_bel=400, batch_size=96,
                           stream=RandomStream(seed), time_stride=2)
    gap = diag.l1_gap[-1]
    dropped = diag.residual[-1] < diag.residual[0]
    ok = gap <= 0.1 and dropped
    return CriterionResult(
        "AC9", ok,
        f"final L1 {gap:.4f}; residual {diag.residual[0]:.4f} -> "
        f"{diag.residual[-1]:.4f}",
        "L1 <= 0.1 and residual below its first-iteration value",
        time.monotonic() - t0)


def ac10_determinism(seed=20_240_110, workers=1):
    """Byte-identical CSV output for 1 and 4 workers on every subcommand."""
    from . import cli
    t0 = time.monotonic()
    ok = True
    report = []
    for sub, extra in cli.determinism_cases():
        outputs = []
        for w in (1, 4):
            with tempfile.TemporaryDirectory() as tmp:
                out = os.path.join(tmp, "run.csv")
                code = cli.main([sub, *extra, "--seed", str(seed),
                                 "--workers", str(w), "--out", out])
                if code != 0:
                    ok = False
                    report.append(f"{sub}: exit {code}")
                    break
                with open(out, "rb") as fh:
                    outputs.append(fh.read())
        if len(outputs) == 2:
            same = outputs[0] == outputs[1]
            ok = ok and same
            report.append(f"{sub}: {'identical' if same else 'DIFFER'}")
    return CriterionResult("AC10", ok, "; ".join(report),
                           "identical bytes for workers in {1, 4}",
                           time.monotonic() - t0)


def ac11_network_gradient(seed=20_240_111, workers=1):
    """Backpropagated parameter gradient against finite differences."""
    t0 = time.monotonic()
    stream = RandomStream(seed)
    net = DriftNetwork.initialize(stream)
    rng = stream.with_key(1).generator()
    t = rng.uniform(0.0, 0.2, 32)
    q = rng.uniform(-3.0, 3.0, 32)
    target = rng.normal(0.0, 1.0, 32)
    _, gw, gb = net.param_grad(t, q, target)
    parts = []
    for w, b in zip(gw, gb):
        parts.append(w.ravel())
        parts.append(b.ravel())
    grad = np.concatenate(parts)
    theta = net.flatten()

    coords = rng.choice(theta.size, size=10, replace=False)
    step = 1e-5
    worst = 0.0
    for c in coords:
        plus = theta.copy()
        plus[c] += step
        minus = theta.copy()
        minus[c] -= step
        probe = net.copy()
        probe.set_flat(plus)
        lp, _, _ = probe.param_grad(t, q, target)
        probe.set_flat(minus)
        lm, _, _ = probe.param_grad(t, q, target)
        fd = (lp - lm) / (2 * step)
        rel = abs(grad[c] - fd) / max(abs(fd), 1e-12)
        worst = max(worst, rel)
    return CriterionResult("AC11", worst <= 1e-4,
                           f"worst relative error {worst:.2e}",
                           "<= 1e-4 on 10 coordinates",
                           time.monotonic() - t0)


ALL_CRITERIA = {
    "AC1": ac1_quartic_relaxation,
    "AC2": ac2_degenerate_gradient,
    "AC3": ac3_martingale,
    "AC4": ac4_bel_vs_finite_difference,
    "AC5": ac5_ou_equivalence,
    "AC6": ac6_maxwell_boltzmann,
    "AC7": ac7_half_bridge,
    "AC8": ac8_gaussian_bridge,
    "AC9": ac9_trainer,
    "AC10": ac10_determinism,
    "AC11": ac11_network_gradient,
}


def run_criteria(only=None, seed_base=None, workers=1, report=print):
    """Run the selected criteria and return the result list."""
    results = []
    for cid, fn in ALL_CRITERIA.items():
        if only and cid not in only:
            continue
        kwargs = {"workers": workers}
        if seed_base is not None:
            kwargs["seed"] = seed_base + int(cid[2:])
        res = fn(**kwargs)
        results.append(res)
        verdict = "PASS" if res.passed else "FAIL"
        report(f"{res.cid}: {verdict}  measured: {res.measured}  "
               f"expected: {res.expected}  ({res.runtime:.1f}s)")
    return results
