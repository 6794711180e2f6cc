"""Time grids, physical parameters and reproducible random streams.

The random stream scheme is counter-based: every (base_seed, point_index,
path_index) triple maps to an independent Philox stream, so results are
bit-identical no matter how work is split across processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonIntegerSpan


@dataclass(frozen=True)
class TimeGrid:
    """Uniform discretization of [t_start, t_end] into n_steps steps."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    @property
    def h(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    def node(self, k: int) -> float:
        # multiplication, never accumulation; last node pinned to t_end
        if k == self.n_steps:
            return self.t_end
        return self.t_start + k * self.h

    def nodes(self) -> np.ndarray:
        out = self.t_start + np.arange(self.n_steps + 1) * self.h
        out[-1] = self.t_end
        return out

    def index_of(self, t: float, rtol: float = 1e-9) -> int:
        """Grid index of a node time; raises if t is not (close to) a node."""
        k = round((t - self.t_start) / self.h)
        if k < 0 or k > self.n_steps or abs(self.node(k) - t) > rtol * max(1.0, abs(t)):
            raise ValueError(f"{t} is not a node of the grid")
        return k

    def up_to(self, k: int) -> "TimeGrid":
        """Sub-grid [t_start, node(k)], same step."""
        if k < 1 or k > self.n_steps:
            raise ValueError("k out of range")
        return TimeGrid(self.t_start, self.node(k), k)

    def from_node(self, k: int) -> "TimeGrid":
        """Sub-grid [node(k), t_end], same step."""
        if k < 0 or k >= self.n_steps:
            raise ValueError("k out of range")
        return TimeGrid(self.node(k), self.t_end, self.n_steps - k)


def make_grid(t_start: float, t_end: float, step: float) -> TimeGrid:
    """Grid whose span must be an integer multiple of `step` (1e-9 relative)."""
    if step <= 0:
        raise ValueError("step must be positive")
    if not t_end > t_start:
        raise ValueError("t_end must exceed t_start")
    ratio = (t_end - t_start) / step
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise NonIntegerSpan(
            f"span {t_end - t_start} is not an integer multiple of step {step}"
        )
    return TimeGrid(t_start, t_end, n)


@dataclass(frozen=True)
class PhysicalParams:
    """Inverse temperature, motility, Stokes time, mass and spatial dimension.

    For the underdamped equations mu is conceptually tau/mass; callers that
    set tau and mass should keep mu consistent (see `with_motility`).
    """

    beta: float = 1.0
    mu: float = 1.0
    tau: float = 1.0
    mass: float = 1.0
    dim: int = 1

    def __post_init__(self):
        for name in ("beta", "mu", "tau", "mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    def with_motility(self) -> "PhysicalParams":
        """Copy with mu set to tau/mass."""
        return replace(self, mu=self.tau / self.mass)


@dataclass(frozen=True)
class RandomStream:
    """Deterministic stream keyed by (base_seed, stream_key).

    Distinct keys give statistically independent Philox streams; the same
    (base_seed, key) always reproduces the same draws, whatever the worker
    assignment.
    """

    base_seed: int
    stream_key: tuple = ()

    def with_key(self, *key: int) -> "RandomStream":
        """Derive a sub-stream by appending to the key tuple."""
        return RandomStream(self.base_seed,
                            self.stream_key + tuple(int(k) for k in key))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.base_seed, spawn_key=self.stream_key)
        return np.random.Generator(np.random.Philox(ss))

    def normals(self, shape) -> np.ndarray:
        return self.generator().standard_normal(shape)


def sample_increments(grid: TimeGrid, dim: int, stream: RandomStream) -> np.ndarray:
    """Per-step standard-normal draws for one path, shape (n_steps, dim)."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return stream.normals((grid.n_steps, dim))


def increment_block(
    stream: RandomStream,
    point_index: int,
    n_paths: int,
    n_steps: int,
    dim: int,
    path_offset: int = 0,
) -> np.ndarray:
    """Standard normals for a block of paths, shape (n_paths, n_steps, dim).

    Row p comes from the stream keyed (point_index, path_offset + p), so a
    block may be produced in slices by concurrent workers and concatenated.
    """
    out = np.empty((n_paths, n_steps, dim))
    for p in range(n_paths):
        out[p] = stream.with_key(point_index, path_offset + p).normals((n_steps, dim))
    return out


@dataclass
class PathEnsemble:
    """A batch of trajectories with the Wiener increments that produced them.

    states are stored in physical-time order (index 0 = t_start) for both
    directions; increments are kept in simulation order (step 0 is the first
    step taken, i.e. from t_end downward for backward paths).
    """

    grid: TimeGrid
    states: np.ndarray      # (n_paths, n_nodes, state_dim)
    increments: np.ndarray  # (n_paths, n_steps, noise_dim)
    direction: str = "forward"

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError("direction must be 'forward' or 'backward'")
        if self.states.shape[1] != self.grid.n_nodes:
            raise ValueError("states must have n_steps+1 nodes per path")
        if self.increments.shape[1] != self.grid.n_steps:
            raise ValueError("increments must have n_steps entries per path")

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @staticmethod
    def concatenate(parts: list["PathEnsemble"]) -> "PathEnsemble":
        first = parts[0]
        return PathEnsemble(
            grid=first.grid,
            states=np.concatenate([p.states for p in parts], axis=0),
            increments=np.concatenate([p.increments for p in parts], axis=0),
            direction=first.direction,
        )
