"""Command-line driver.

Subcommands cover every estimator and solver: density evaluation for both
dynamics, value and gradient estimation, the iterative and gradient-descent
bridge solvers, and a bundled validation run. Configuration comes from a
key=value file plus command-line overrides; results land in a CSV with a
fixed header and a JSON summary next to it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import acceptance
from .bridge import (BoundaryPair, TrainPhase, half_bridge_iterate,
                     load_checkpoint, save_checkpoint, train)
from .core import PhysicalParams, RandomStream, make_grid
from .errors import (ConfigError, DegenerateWeight, McBridgeError,
                     NonFiniteState, ZeroMass)
from .fokker_planck import (DensityQuery, box_smooth, density_overdamped,
                            density_underdamped)
from .hjb import (TerminalData, bridge_running_cost, dynkin_value,
                  grad_value_overdamped, grad_value_underdamped)
from .potentials import (DoubleWell, MonomialGrad, NetworkDrift,
                         QuadraticMatrix, QuarticShift, TabulatedDrift,
                         ZeroPotential)

NUMERICAL_ERRORS = (NonFiniteState, DegenerateWeight, ZeroMass)


@dataclass
class GaussianDensity:
    """Product Gaussian with a common mean and variance per coordinate."""

    mean: float
    var: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        d = x.shape[-1]
        sq = np.sum((x - self.mean) ** 2, axis=-1)
        return np.exp(-0.5 * sq / self.var) / (2 * np.pi * self.var) ** (d / 2)


def parse_config_file(path):
    """Read key=value lines; '#' starts a comment, blank lines are skipped."""
    out = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(
                        f"{path}:{lineno}: expected key=value, got {line!r}")
                key, value = line.split("=", 1)
                out[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return out


class Config:
    """String-keyed configuration with typed, validated accessors."""

    def __init__(self, values):
        self.values = dict(values)

    def _raw(self, key, default=None):
        if key in self.values:
            return self.values[key]
        if default is None:
            raise ConfigError(f"missing required config key: {key}")
        return default

    def get_float(self, key, default=None):
        raw = self._raw(key, default)
        try:
            return float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key} must be a number, got {raw!r}")

    def get_int(self, key, default=None):
        raw = self._raw(key, default)
        try:
            return int(str(raw), 10)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key} must be an integer, "
                              f"got {raw!r}")

    def get_str(self, key, default=None):
        return str(self._raw(key, default))


def build_params(cfg: Config) -> PhysicalParams:
    return PhysicalParams(beta=cfg.get_float("beta"),
                          mu=cfg.get_float("mu", 1.0),
                          tau=cfg.get_float("tau", 1.0),
                          mass=cfg.get_float("mass", 1.0),
                          dim=cfg.get_int("dim", 1))


def build_grid(cfg: Config):
    return make_grid(cfg.get_float("t_start", 0.0), cfg.get_float("t_end"),
                     cfg.get_float("h"))


def build_potential(cfg: Config, key="potential"):
    """Potential from a name, a stiffness, a drift table, or a checkpoint."""
    name = cfg.get_str(key)
    if name == "zero":
        return ZeroPotential()
    if name == "quartic-shift":
        return QuarticShift()
    if name == "double-well":
        return DoubleWell()
    if name == "monomial":
        return MonomialGrad()
    if name == "quadratic":
        stiff = cfg.get_float(key + "_stiffness", 1.0)
        dim = cfg.get_int("dim", 1)
        return QuadraticMatrix(stiff * np.eye(dim))
    if name.startswith("table:"):
        path = name[len("table:"):]
        try:
            with np.load(path) as data:
                return TabulatedDrift(data["times"], data["xs"], data["drift"])
        except OSError as exc:
            raise ConfigError(f"config key {key}: cannot read drift table "
                              f"{path}: {exc}") from exc
    if name.startswith("checkpoint:"):
        path = name[len("checkpoint:"):]
        try:
            net, _, _, _, _ = load_checkpoint(path)
        except OSError as exc:
            raise ConfigError(f"config key {key}: cannot read checkpoint "
                              f"{path}: {exc}") from exc
        return NetworkDrift(net)
    raise ConfigError(f"config key {key}: unknown potential {name!r}")


def build_terminal(cfg: Config, potential, params, kind):
    name = cfg.get_str("terminal", "unit")
    if name == "unit":
        phi = _phi_unit
    elif name == "position-squared":
        phi = _phi_position_squared
    elif name == "momentum":
        phi = _phi_momentum
    else:
        raise ConfigError(f"config key terminal: unknown payoff {name!r}")
    running = None
    if cfg.get_int("bridge_cost", 0):
        running = bridge_running_cost(potential, params, kind)
    return TerminalData(phi=phi, running_cost=running)


def _phi_unit(x):
    return np.ones(len(x))


def _phi_position_squared(x):
    return x[:, 0] ** 2


def _phi_momentum(x):
    d = x.shape[1] // 2
    return x[:, d]


def _fmt(v):
    return f"{float(v):.17g}"


def write_csv(path, header, rows):
    """Fixed column order, dot decimals, LF endings, 17 significant digits."""
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_summary(csv_path, cfg: Config, seed, runtime, diagnostics):
    path = os.path.splitext(csv_path)[0] + ".json"
    payload = {"config": cfg.values, "seed": int(seed),
               "runtime_seconds": round(runtime, 3),
               "diagnostics": diagnostics}
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _split_density(query: DensityQuery, solver, workers: int):
    """Run a density query on a worker pool; results match workers=1."""
    n = len(query.eval_points)
    if workers <= 1 or n == 1:
        return solver(query)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    chunks = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if a == b:
            continue
        chunks.append(DensityQuery(
            query.eval_points[a:b], query.eval_time, query.initial_density,
            query.n_paths, query.grid, query.params, query.potential,
            query.stream, point_offset=query.point_offset + int(a)))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(solver, chunks))
    return [e for part in parts for e in part]


def _density_common(cfg, args, phase_space):
    params = build_params(cfg)
    grid = build_grid(cfg)
    potential = build_potential(cfg)
    initial = GaussianDensity(cfg.get_float("init_mean", 0.0),
                              cfg.get_float("init_var", 1.0))
    qs = np.linspace(cfg.get_float("q_min"), cfg.get_float("q_max"),
                     cfg.get_int("n_points"))
    if phase_space:
        p_value = cfg.get_float("p_value", 0.0)
        points = np.column_stack([qs, np.full_like(qs, p_value)])
    else:
        points = qs[:, None]
    query = DensityQuery(points, cfg.get_float("eval_time", grid.t_end),
                         initial, cfg.get_int("n_paths"), grid, params,
                         potential, RandomStream(args.seed))
    solver = density_underdamped if phase_space else density_overdamped
    ests = _split_density(query, solver, args.workers)
    half_width = cfg.get_int("smooth_half_width", 0)
    means = np.array([e.mean for e in ests])
    if half_width > 0:
        means = box_smooth(means, half_width)
    return qs, points, ests, means


def cmd_fp_overdamped(cfg, args):
    qs, _, ests, means = _density_common(cfg, args, phase_space=False)
    rows = [(q, m, e.std_error, e.mean_weight)
            for q, m, e in zip(qs, means, ests)]
    write_csv(args.out, "q,estimate,std_error,mean_weight", rows)
    return {"n_points": len(qs)}


def cmd_fp_underdamped(cfg, args):
    qs, points, ests, means = _density_common(cfg, args, phase_space=True)
    rows = [(pt[0], pt[1], m, e.std_error, e.mean_weight)
            for pt, m, e in zip(points, means, ests)]
    write_csv(args.out, "q,p,estimate,std_error,mean_weight", rows)
    return {"n_points": len(qs)}


def cmd_hjb_value(cfg, args):
    params = build_params(cfg)
    grid = build_grid(cfg)
    potential = build_potential(cfg)
    kind = cfg.get_str("kind", "overdamped")
    if kind not in ("overdamped", "underdamped"):
        raise ConfigError(f"config key kind: expected overdamped or "
                          f"underdamped, got {kind!r}")
    terminal = build_terminal(cfg, potential, params, kind)
    x = [float(v) for v in cfg.get_str("point").split(",")]
    t = cfg.get_float("eval_time", grid.t_start)
    est = dynkin_value(x, t, kind, potential, terminal, grid, params,
                       cfg.get_int("n_paths"), RandomStream(args.seed))
    header = ",".join(f"x{k}" for k in range(len(x))) + ",estimate,std_error"
    write_csv(args.out, header, [(*x, est.mean, est.std_error)])
    return {"estimate": est.mean, "std_error": est.std_error}


def _grad_od_point(job):
    (q, k, potential, terminal, grid, params, n_paths, seed, t) = job
    est = grad_value_overdamped([q], t, potential, terminal, grid, params,
                                n_paths, RandomStream(seed), point_index=k)
    return est[0]


def cmd_hjb_grad_overdamped(cfg, args):
    params = build_params(cfg)
    grid = build_grid(cfg)
    potential = build_potential(cfg)
    terminal = build_terminal(cfg, potential, params, "overdamped")
    qs = np.linspace(cfg.get_float("q_min"), cfg.get_float("q_max"),
                     cfg.get_int("n_points"))
    t = cfg.get_float("eval_time", grid.t_start)
    n_paths = cfg.get_int("n_paths")
    jobs = [(q, k, potential, terminal, grid, params, n_paths, args.seed, t)
            for k, q in enumerate(qs)]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            ests = list(pool.map(_grad_od_point, jobs))
    else:
        ests = [_grad_od_point(job) for job in jobs]
    rows = [(q, e.mean, e.std_error) for q, e in zip(qs, ests)]
    write_csv(args.out, "q,estimate,std_error", rows)
    return {"n_points": len(qs)}


def cmd_hjb_grad_underdamped(cfg, args):
    params = build_params(cfg)
    grid = build_grid(cfg)
    potential = build_potential(cfg)
    terminal = build_terminal(cfg, potential, params, "underdamped")
    x = [float(v) for v in cfg.get_str("point").split(",")]
    t = cfg.get_float("eval_time", grid.t_start)
    est = grad_value_underdamped(x, t, potential, terminal, grid, params,
                                 cfg.get_int("n_paths"),
                                 RandomStream(args.seed),
                                 direction=cfg.get_str("direction",
                                                       "momentum"))
    header = ",".join(f"x{k}" for k in range(len(x))) + ",estimate,std_error"
    write_csv(args.out, header, [(*x, est.mean, est.std_error)])
    return {"estimate": est.mean, "std_error": est.std_error}


def _build_boundary(cfg, params):
    return BoundaryPair(build_potential(cfg, "u_iota"),
                        build_potential(cfg, "u_f"), params.beta,
                        (cfg.get_float("x_min"), cfg.get_float("x_max")))


def cmd_bridge_iterate(cfg, args):
    params = build_params(cfg)
    grid = build_grid(cfg)
    boundary = _build_boundary(cfg, params)
    xs = np.linspace(boundary.interval[0], boundary.interval[1],
                     cfg.get_int("n_points"))
    state, drift = half_bridge_iterate(boundary, grid, xs, params,
                                       cfg.get_int("n_iters"),
                                       cfg.get_int("n_paths"),
                                       RandomStream(args.seed))
    dens0 = state.phi[0] * state.phi_hat[0]
    densf = state.phi[-1] * state.phi_hat[-1]
    rows = list(zip(xs, dens0, densf, drift.drift[0], drift.drift[-1]))
    write_csv(args.out,
              "x,density_t0,density_tf,drift_t0,drift_tf", rows)
    drift_out = cfg.get_str("drift_out", "")
    if drift_out:
        np.savez(drift_out, times=drift.times, xs=drift.qgrid,
                 drift=drift.drift)
    return {"n_iters": state.n_iters}


def _parse_schedule(cfg):
    phases = []
    k = 1
    while f"phase{k}" in cfg.values:
        raw = cfg.get_str(f"phase{k}")
        bits = raw.split(",")
        if len(bits) != 5:
            raise ConfigError(f"config key phase{k}: expected "
                              f"n_iters,n_updates,optimizer,gamma1,gamma2")
        try:
            phases.append(TrainPhase(int(bits[0]), int(bits[1]),
                                     bits[2].strip(), float(bits[3]),
                                     float(bits[4])))
        except ValueError:
            raise ConfigError(f"config key phase{k}: malformed value {raw!r}")
        k += 1
    if not phases:
        raise ConfigError("missing required config key: phase1")
    return phases


def cmd_bridge_train(cfg, args):
    params = build_params(cfg)
    grid = build_grid(cfg)
    boundary = _build_boundary(cfg, params)
    schedule = _parse_schedule(cfg)
    net = lam = None
    resume = cfg.get_str("resume", "")
    if resume:
        net, lam, _, _, _ = load_checkpoint(resume)
    net, lam, diag = train(boundary, grid, params, schedule,
                           n_paths_fp=cfg.get_int("n_paths_fp", 100),
                           n_paths_bel=cfg.get_int("n_paths_bel", 10),
                           batch_size=cfg.get_int("batch_size", 128),
                           stream=RandomStream(args.seed),
                           time_stride=cfg.get_int("time_stride", 1),
                           net=net, lam=lam)
    rows = [(k, g, r, l) for k, (g, r, l) in
            enumerate(zip(diag.l1_gap, diag.residual, diag.loss))]
    write_csv(args.out, "iteration,l1_gap,residual,loss", rows)
    checkpoint = cfg.get_str("checkpoint_out", "")
    if checkpoint:
        save_checkpoint(checkpoint, net, lam, len(schedule) - 1,
                        schedule[-1].n_iters, args.seed)
    return {"final_l1_gap": diag.l1_gap[-1],
            "final_residual": diag.residual[-1]}


def cmd_oracle_check(cfg, args):
    only = set(args.only) if args.only else None
    if only:
        unknown = only - set(acceptance.ALL_CRITERIA)
        if unknown:
            raise ConfigError(f"--only: unknown criterion "
                              f"{sorted(unknown)[0]}")
    results = acceptance.run_criteria(only=only, workers=args.workers)
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "fp-overdamped": cmd_fp_overdamped,
    "fp-underdamped": cmd_fp_underdamped,
    "hjb-value": cmd_hjb_value,
    "hjb-grad-overdamped": cmd_hjb_grad_overdamped,
    "hjb-grad-underdamped": cmd_hjb_grad_underdamped,
    "bridge-iterate": cmd_bridge_iterate,
    "bridge-train": cmd_bridge_train,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mcbridge",
        description="Monte Carlo density, gradient, and bridge solvers.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in list(COMMANDS) + ["oracle-check"]:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None,
                       help="key=value configuration file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--paths", type=int, default=None,
                       help="override the n_paths config key")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default=None,
                       help="output CSV path (JSON summary written beside it)")
        if name == "oracle-check":
            p.add_argument("--only", action="append", default=None,
                           help="run only the named criterion (repeatable)")
        p.add_argument("overrides", nargs="*",
                       help="key=value settings overriding the config file")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        values = parse_config_file(args.config) if args.config else {}
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"override must be key=value, got {item!r}")
            key, value = item.split("=", 1)
            values[key.strip()] = value.strip()
        if args.paths is not None:
            values["n_paths"] = str(args.paths)
        cfg = Config(values)
        if args.subcommand == "oracle-check":
            return cmd_oracle_check(cfg, args)
        if args.out is None:
            raise ConfigError("missing required option: --out")
        started = time.monotonic()
        diagnostics = COMMANDS[args.subcommand](cfg, args)
        write_summary(args.out, cfg, args.seed, time.monotonic() - started,
                      diagnostics)
        return 0
    except ConfigError as exc:
        print(f"mcbridge: config error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"mcbridge: numerical failure: "
              f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except McBridgeError as exc:
        print(f"mcbridge: error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3


def determinism_cases():
    """Small fixed configurations exercising every CSV-writing subcommand."""
    fp_base = ["beta=1", "t_end=0.1", "h=0.01", "potential=double-well",
               "q_min=-1", "q_max=1", "n_points=8", "n_paths=200"]
    return [
        ("fp-overdamped", fp_base),
        ("fp-underdamped", fp_base + ["p_value=0.5"]),
        ("hjb-value", ["beta=1", "t_end=0.1", "h=0.01",
                       "potential=double-well", "terminal=position-squared",
                       "point=0.5", "n_paths=500"]),
        ("hjb-grad-overdamped", ["beta=1", "t_end=0.1", "h=0.01",
                                 "potential=double-well",
                                 "terminal=position-squared",
                                 "q_min=-1", "q_max=1", "n_points=8",
                                 "n_paths=500"]),
        ("hjb-grad-underdamped", ["beta=1", "t_end=0.1", "h=0.01",
                                  "potential=zero", "terminal=momentum",
                                  "point=0,1", "n_paths=500"]),
        ("bridge-iterate", ["beta=1", "t_end=0.1", "h=0.01",
                            "u_iota=quartic-shift", "u_f=double-well",
                            "x_min=-3", "x_max=3", "n_points=31",
                            "n_iters=2", "n_paths=2000"]),
        ("bridge-train", ["beta=1", "t_end=0.1", "h=0.01",
                          "u_iota=quartic-shift", "u_f=double-well",
                          "x_min=-3", "x_max=3", "phase1=2,20,sgd,0.5,0.01",
                          "n_paths_fp=50", "n_paths_bel=5", "batch_size=32",
                          "time_stride=5"]),
    ]


if __name__ == "__main__":
    sys.exit(main())
