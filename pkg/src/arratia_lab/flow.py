"""Finitely many coalescing Brownian particles.

Particles start at ascending points, move as independent standard Wiener
processes until two neighbours meet, and move together afterwards. A cluster
is always a contiguous block of particle indices and is identified by its
lowest index (the leader); the cluster follows the leader's innovation
stream.

Two detection schemes are available. ``"grid"`` merges neighbours only when
their order would invert at a grid time. ``"bridge"`` additionally merges a
still-separate pair whose gap went from ``a > 0`` to ``b > 0`` over a step of
length ``dt`` with probability ``exp(-a * b / dt)``, which is the exact
probability that a Brownian bridge with diffusion coefficient 2 (the law of
the gap between two independent standard Wiener processes) touches zero.
The uniform for the pair ``(i, i + 1)`` comes from particle ``i + 1``'s
stream, which always exists for a pair that is not merged at time 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from arratia_lab.rng import stream
from arratia_lab.steps import StepMap

SCHEMES = {
    "grid": "grid",
    "grid-crossing": "grid",
    "bridge": "bridge",
    "bridge-corrected": "bridge",
}

# Upper bound on the bytes of pre-drawn noise held at once by the batch
# simulator.
NOISE_BUDGET = 128 * 2**20


def _normalize_scheme(scheme: str) -> str:
    try:
        return SCHEMES[scheme]
    except KeyError:
        raise ValueError(
            f"unknown scheme {scheme!r}; expected one of {sorted(SCHEMES)}"
        ) from None


def _check_starts(starts: Sequence[float]) -> np.ndarray:
    arr = np.asarray(starts, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("starts must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError("starts must be finite")
    if np.any(np.diff(arr) < 0):
        raise ValueError("starts must be ascending (duplicates are allowed)")
    return arr


def time_grid(horizon: float, dt: float) -> np.ndarray:
    """Uniform grid ``0 = t_0 < ... < t_K = horizon`` with step at most dt."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if dt > horizon:
        raise ValueError("dt must not exceed the horizon")
    steps = max(1, math.ceil(horizon / dt - 1e-9))
    return np.linspace(0.0, horizon, steps + 1)


@dataclass(frozen=True)
class FlowConfig:
    starts: tuple[float, ...]
    horizon: float
    dt: float = 1e-3
    scheme: str = "bridge"
    seed: int = 0
    replica_index: int = 0

    def __post_init__(self):
        starts = _check_starts(self.starts)
        object.__setattr__(self, "starts", tuple(float(s) for s in starts))
        object.__setattr__(self, "scheme", _normalize_scheme(self.scheme))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.dt > self.horizon:
            raise ValueError("dt must not exceed the horizon")
        if self.replica_index < 0:
            raise ValueError("replica_index must be nonnegative")

    @property
    def time_grid(self) -> np.ndarray:
        return time_grid(self.horizon, self.dt)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FlowRealization:
    """One realization on the full time grid.

    ``positions[i, k]`` is the position of particle ``i`` at ``time_grid[k]``;
    ``merge_labels[i, k]`` is the leader index of its cluster; and
    ``merge_times[i]`` is the first grid time at which particles ``i`` and
    ``i + 1`` share a cluster (``nan`` if they never do).
    """

    config: FlowConfig
    time_grid: np.ndarray
    positions: np.ndarray
    merge_labels: np.ndarray
    merge_times: np.ndarray

    def __post_init__(self):
        for name in ("time_grid", "positions", "merge_labels", "merge_times"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def grid_index(self, t: float) -> int:
        k = int(np.searchsorted(self.time_grid, t))
        for j in (k - 1, k):
            if 0 <= j < self.time_grid.size and math.isclose(
                self.time_grid[j], t, rel_tol=1e-12, abs_tol=1e-15
            ):
                return j
        raise ValueError(f"t={t!r} is not on the time grid")

    def n_clusters(self, t: float) -> int:
        k = self.grid_index(t)
        return int(np.unique(self.merge_labels[:, k]).size)


@dataclass(frozen=True, eq=False)
class FreeWienerFamily:
    starts: np.ndarray
    time_grid: np.ndarray
    paths: np.ndarray
    running_max: np.ndarray
    running_min: np.ndarray

    def __post_init__(self):
        for name in ("starts", "time_grid", "paths", "running_max", "running_min"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


@dataclass
class FlowBatch:
    """Raw arrays from :func:`simulate_batch`, replica-major.

    ``positions`` and ``labels`` have shape ``(replicas, particles, len(keep))``
    and hold the state at the kept grid indices.
    """

    starts: np.ndarray
    time_grid: np.ndarray
    keep: np.ndarray
    replicas: np.ndarray
    positions: np.ndarray
    labels: np.ndarray
    merge_times: np.ndarray

    def snapshot(self, row: int, slot: int = -1) -> StepMap:
        return snapshot_from_state(
            self.starts, self.positions[row, :, slot], self.labels[row, :, slot]
        )


def _labels(joined: np.ndarray) -> np.ndarray:
    """Leader index for every particle given the adjacent-merge flags."""
    r, p1 = joined.shape
    idx = np.broadcast_to(np.arange(p1 + 1), (r, p1 + 1))
    is_leader = np.ones((r, p1 + 1), dtype=bool)
    is_leader[:, 1:] = ~joined
    return np.maximum.accumulate(np.where(is_leader, idx, 0), axis=1)


def _draw_noise(seed, replicas, n_particles, n_steps, sd, leaders0, uniforms):
    normals = np.zeros((len(replicas), n_particles, n_steps))
    unif = np.ones((len(replicas), n_particles, n_steps)) if uniforms else None
    for row, rep in enumerate(replicas):
        for p in range(n_particles):
            if not leaders0[p]:
                continue
            g = stream(seed, int(rep), p)
            normals[row, p] = g.standard_normal(n_steps) * sd
            if uniforms:
                unif[row, p] = g.random(n_steps)
    return normals, unif


def _simulate_chunk(starts, grid, scheme, seed, replicas, keep):
    n_p = starts.size
    n_steps = grid.size - 1
    step = grid[1] - grid[0]
    sd = math.sqrt(step)
    r = len(replicas)

    joined = np.zeros((r, n_p - 1), dtype=bool)
    joined[:, :] = np.diff(starts) == 0
    leaders0 = np.ones(n_p, dtype=bool)
    leaders0[1:] = np.diff(starts) != 0
    merge_times = np.full((r, n_p - 1), np.nan)
    merge_times[joined] = 0.0

    bridge = scheme == "bridge"
    normals, unif = _draw_noise(seed, replicas, n_p, n_steps, sd, leaders0, bridge)

    pos = np.broadcast_to(starts, (r, n_p)).copy()
    labels = _labels(joined)
    keep_pos = np.empty((r, n_p, keep.size))
    keep_lab = np.empty((r, n_p, keep.size), dtype=np.int64)
    slot = 0
    if keep[0] == 0:
        keep_pos[:, :, 0] = pos
        keep_lab[:, :, 0] = labels
        slot = 1

    # step-major copies so each step reads contiguous memory
    normals = np.ascontiguousarray(normals.transpose(2, 0, 1))
    if bridge:
        unif = np.ascontiguousarray(unif[:, 1:, :].transpose(2, 0, 1))
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            moved = pos + normals[k]
            new = np.take_along_axis(moved, labels, axis=1)
            if n_p > 1:
                free = ~joined
                gap_old = np.diff(pos, axis=1)
                gap_new = np.diff(new, axis=1)
                hit = free & (gap_new <= 0)
                if bridge:
                    p_touch = np.exp(-gap_old * gap_new / step)
                    hit |= free & (gap_new > 0) & (unif[k] < p_touch)
                t_now = grid[k + 1]
                while hit.any():
                    joined |= hit
                    merge_times[hit] = t_now
                    labels = _labels(joined)
                    new = np.take_along_axis(new, labels, axis=1)
                    hit = ~joined & (np.diff(new, axis=1) <= 0)
            pos = new
            if slot < keep.size and keep[slot] == k + 1:
                keep_pos[:, :, slot] = pos
                keep_lab[:, :, slot] = labels
                slot += 1
    return keep_pos, keep_lab, merge_times


def _chunks(n_items: int, per_item_bytes: int) -> Iterable[slice]:
    size = max(1, NOISE_BUDGET // max(1, per_item_bytes))
    for lo in range(0, n_items, size):
        yield slice(lo, min(n_items, lo + size))


def simulate_batch(
    starts: Sequence[float],
    horizon: float,
    dt: float,
    scheme: str = "bridge",
    seed: int = 0,
    replicas: Sequence[int] | int = 1,
    keep: Sequence[int] | str = "final",
) -> FlowBatch:
    """Simulate many replicas of the same flow configuration.

    ``keep`` selects which grid indices to retain: ``"final"``, ``"all"`` or
    an explicit ascending list. Replica ``j`` is bit-identical to
    ``simulate_flow(FlowConfig(..., replica_index=j))`` whatever the batch.
    """
    starts = _check_starts(starts)
    scheme = _normalize_scheme(scheme)
    grid = time_grid(horizon, dt)
    if isinstance(replicas, (int, np.integer)):
        replicas = np.arange(int(replicas))
    replicas = np.asarray(replicas, dtype=np.int64)
    if isinstance(keep, str):
        if keep == "final":
            keep_idx = np.array([grid.size - 1])
        elif keep == "all":
            keep_idx = np.arange(grid.size)
        else:
            raise ValueError(f"unknown keep mode {keep!r}")
    else:
        keep_idx = np.asarray(keep, dtype=np.int64)
        if keep_idx.size == 0 or np.any(np.diff(keep_idx) <= 0):
            raise ValueError("keep indices must be strictly ascending")
        if keep_idx[0] < 0 or keep_idx[-1] >= grid.size:
            raise ValueError("keep index outside the time grid")

    n_p = starts.size
    per_replica = n_p * (grid.size - 1) * 8 * (2 if scheme == "bridge" else 1)
    parts = [
        _simulate_chunk(starts, grid, scheme, seed, replicas[sl], keep_idx)
        for sl in _chunks(replicas.size, per_replica)
    ]
    return FlowBatch(
        starts=starts,
        time_grid=grid,
        keep=keep_idx,
        replicas=replicas,
        positions=np.concatenate([p[0] for p in parts]),
        labels=np.concatenate([p[1] for p in parts]),
        merge_times=np.concatenate([p[2] for p in parts]),
    )


def simulate_flow(config: FlowConfig) -> FlowRealization:
    batch = simulate_batch(
        config.starts,
        config.horizon,
        config.dt,
        scheme=config.scheme,
        seed=config.seed,
        replicas=[config.replica_index],
        keep="all",
    )
    return FlowRealization(
        config=config,
        time_grid=batch.time_grid,
        positions=batch.positions[0],
        merge_labels=batch.labels[0],
        merge_times=batch.merge_times[0],
    )


def snapshot_from_state(starts, positions, labels) -> StepMap:
    """Right-continuous step map u -> x(u, t) over [starts[0], starts[-1]].

    Each cluster owns the start interval from its leader up to the next
    cluster's leader. When the last particle is alone its piece degenerates
    to the single point ``starts[-1]``.
    """
    starts = np.asarray(starts, dtype=float)
    labels = np.asarray(labels)
    first = np.flatnonzero(np.r_[True, labels[1:] != labels[:-1]])
    return StepMap(
        breakpoints=starts[first[1:]],
        values=np.asarray(positions, dtype=float)[first],
        lo=float(starts[0]),
        hi=float(starts[-1]),
    )


def snapshot(r: FlowRealization, t: float) -> StepMap:
    k = r.grid_index(t)
    return snapshot_from_state(r.config.starts, r.positions[:, k], r.merge_labels[:, k])


def coalescence_cdf(gap: float, t: float) -> float:
    """P{two particles `gap` apart have met by time t}.

    The gap evolves as a Wiener process with diffusion coefficient 2, so the
    hitting probability of zero is ``erfc(gap / (2 sqrt(t)))``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if gap < 0:
        raise ValueError("gap must be nonnegative")
    return float(special.erfc(gap / (2.0 * math.sqrt(t))))


def simulate_free_wiener_batch(starts, horizon, dt, seed, replicas):
    """Running max and min of independent Wiener paths, replica-major.

    Returns ``(running_max, running_min)`` each of shape
    ``(replicas, particles)``; extrema are taken over the grid only.
    """
    starts = np.asarray(starts, dtype=float)
    grid = time_grid(horizon, dt)
    n_steps = grid.size - 1
    sd = math.sqrt(grid[1] - grid[0])
    if isinstance(replicas, (int, np.integer)):
        replicas = np.arange(int(replicas))
    replicas = np.asarray(replicas, dtype=np.int64)
    n_p = starts.size
    mx = np.empty((replicas.size, n_p))
    mn = np.empty((replicas.size, n_p))
    for row, rep in enumerate(replicas):
        for p in range(n_p):
            path = np.cumsum(stream(seed, int(rep), p).standard_normal(n_steps) * sd)
            mx[row, p] = max(0.0, path.max()) + starts[p]
            mn[row, p] = min(0.0, path.min()) + starts[p]
    return mx, mn


def simulate_free_wieners(starts, horizon: float, dt: float, seed: int,
                          replica_index: int = 0) -> FreeWienerFamily:
    starts = np.asarray(starts, dtype=float)
    if starts.ndim != 1:
        raise ValueError("starts must be 1-d")
    grid = time_grid(horizon, dt)
    n_steps = grid.size - 1
    sd = math.sqrt(grid[1] - grid[0])
    paths = np.empty((starts.size, grid.size))
    for p, s in enumerate(starts):
        inc = stream(seed, replica_index, p).standard_normal(n_steps) * sd
        paths[p, 0] = 0.0
        np.cumsum(inc, out=paths[p, 1:])
    paths += starts[:, None]
    paths[:, 0] = starts
    return FreeWienerFamily(
        starts=starts,
        time_grid=grid,
        paths=paths,
        running_max=paths.max(axis=1),
        running_min=paths.min(axis=1),
    )
