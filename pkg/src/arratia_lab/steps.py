"""Monotone right-continuous step functions and their atomic measures.

A snapshot ``x(., t)`` of the flow over a window is a nondecreasing step map.
Pushing Lebesgue measure on the window forward through it gives an atomic
measure with one atom per cluster position; the cumulative function of that
measure is the dual snapshot ``y(., t)``. With this construction

    sum_i h(theta_i) * mass_i == integral of h(x(u, t)) du over the window

holds exactly for every h, which is the change-of-variables identity that
the rest of the package relies on.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


def _evaluate(h: Callable, points: np.ndarray) -> np.ndarray:
    out = np.asarray(h(points), dtype=float)
    if out.shape != points.shape:
        out = np.array([float(h(p)) for p in points], dtype=float)
    return out


def _readonly(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StepMap:
    """Right-continuous step function on ``[lo, hi]``.

    Piece ``k`` is ``[edges[k], edges[k + 1])`` with ``edges = [lo,
    *breakpoints, hi]``; the last piece is closed. A breakpoint may equal
    ``hi``, in which case the last piece is the single point ``{hi}``. Either
    end may be infinite.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    lo: float
    hi: float

    def __post_init__(self):
        b = _readonly(self.breakpoints)
        v = _readonly(self.values)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        if b.ndim != 1 or v.ndim != 1 or v.size != b.size + 1:
            raise ValueError("need exactly one more value than breakpoints")
        if not self.lo <= self.hi:
            raise ValueError("empty domain")
        if b.size:
            if np.any(np.diff(b) <= 0):
                raise ValueError("breakpoints must be strictly ascending")
            if not (b[0] > self.lo and b[-1] <= self.hi):
                raise ValueError("breakpoints must lie in (lo, hi]")

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate(([self.lo], self.breakpoints, [self.hi]))

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def n_pieces(self) -> int:
        return self.values.size

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u < self.lo) | (u > self.hi)):
            raise ValueError("argument outside the step map's domain")
        return self.values[np.searchsorted(self.breakpoints, u, side="right")]


@dataclass(frozen=True, eq=False)
class JumpMeasure:
    """Finite atomic measure ``sum_i mass_i * delta(theta_i)``."""

    theta: np.ndarray
    mass: np.ndarray
    window: tuple[float, float]

    def __post_init__(self):
        t = _readonly(self.theta)
        m = _readonly(self.mass)
        object.__setattr__(self, "theta", t)
        object.__setattr__(self, "mass", m)
        object.__setattr__(self, "window", (float(self.window[0]), float(self.window[1])))
        if t.shape != m.shape or t.ndim != 1:
            raise ValueError("theta and mass must be 1-d of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("atom locations must be strictly ascending")
        if np.any(~(m > 0)):
            raise ValueError("atom masses must be positive")

    def __len__(self):
        return self.theta.size

    @property
    def total_mass(self) -> float:
        return math.fsum(self.mass)

    def restrict(self, lo: float, hi: float) -> "JumpMeasure":
        keep = (self.theta >= lo) & (self.theta <= hi)
        return JumpMeasure(self.theta[keep], self.mass[keep], self.window)

    def mass_in(self, lo: float, hi: float) -> float:
        keep = (self.theta >= lo) & (self.theta <= hi)
        return math.fsum(self.mass[keep])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "mass"])
        for t, m in zip(self.theta, self.mass):
            w.writerow([repr(float(t)), repr(float(m))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, window=(-math.inf, math.inf)) -> "JumpMeasure":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["theta", "mass"]:
            raise ValueError("expected header 'theta,mass'")
        data = [(float(a), float(b)) for a, b in rows[1:]]
        theta = [a for a, _ in data]
        mass = [b for _, b in data]
        return cls(np.array(theta), np.array(mass), window)

    def to_json(self) -> str:
        return json.dumps(
            {
                "window": list(self.window),
                "atoms": [[float(t), float(m)] for t, m in zip(self.theta, self.mass)],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "JumpMeasure":
        obj = json.loads(text)
        atoms = obj["atoms"]
        return cls(
            np.array([a[0] for a in atoms], dtype=float),
            np.array([a[1] for a in atoms], dtype=float),
            tuple(obj["window"]),
        )


def dual_snapshot(x: StepMap) -> tuple[StepMap, JumpMeasure]:
    """Atoms of the pushforward of Lebesgue measure under ``x``, and their
    cumulative function.

    Each distinct value of ``x`` becomes an atom whose mass is the length of
    its preimage; zero-length preimages (a degenerate final piece) carry no
    mass and are dropped. The cumulative function is anchored so that it
    equals ``x.lo`` to the left of every atom; its value after an atom is the
    right end of that atom's preimage, taken directly from the edges of
    ``x``.
    """
    if not x.is_monotone():
        raise ValueError("dual snapshot needs a nondecreasing step map")
    if not (math.isfinite(x.lo) and math.isfinite(x.hi)):
        raise ValueError("dual snapshot needs a bounded window")
    edges = x.edges
    v = x.values
    group_start = np.flatnonzero(np.r_[True, v[1:] != v[:-1]])
    group_end = np.r_[group_start[1:], v.size]
    theta = v[group_start]
    left = edges[group_start]
    right = edges[group_end]
    mass = right - left
    keep = mass > 0
    mu = JumpMeasure(theta[keep], mass[keep], (x.lo, x.hi))
    y = StepMap(
        breakpoints=mu.theta,
        values=np.concatenate(([x.lo], right[keep])),
        lo=-math.inf,
        hi=math.inf,
    )
    return y, mu


def cumulative(mu: JumpMeasure, anchor: float) -> StepMap:
    """``u -> anchor + mu((-inf, u])`` as a step map on the whole line."""
    values = np.concatenate(([anchor], anchor + np.cumsum(mu.mass)))
    return StepMap(mu.theta, values, -math.inf, math.inf)


def jump_measure(y: StepMap) -> JumpMeasure:
    """Stieltjes measure ``dy`` of a nondecreasing step map: atoms at the
    breakpoints with mass equal to the jump."""
    if not y.is_monotone():
        raise ValueError("jump measure needs a nondecreasing step map")
    jumps = np.diff(y.values)
    keep = jumps > 0
    return JumpMeasure(y.breakpoints[keep], jumps[keep], (y.lo, y.hi))


def stieltjes_integral(h: Callable, mu: JumpMeasure) -> float:
    if len(mu) == 0:
        return 0.0
    return math.fsum(_evaluate(h, mu.theta) * mu.mass)


def pushforward_integral(h: Callable, x: StepMap) -> float:
    """Integral of ``h(x(u))`` over the domain of ``x``, piece by piece."""
    if not x.is_monotone():
        raise ValueError("pushforward integral needs a nondecreasing step map")
    lengths = x.lengths
    keep = lengths > 0
    if not keep.any():
        return 0.0
    return math.fsum(_evaluate(h, x.values[keep]) * lengths[keep])


def growth_constant(y: StepMap) -> float:
    """Exact ``sup |y(u)| / |u|`` over ``|u| >= 1`` within the domain of y."""
    edges = y.edges
    best = -math.inf
    last = y.values.size - 1
    for k, val in enumerate(y.values):
        a, b = edges[k], edges[k + 1]
        if b > 1 or (k == last and b == 1):
            best = max(best, abs(val) / max(a, 1.0))
        if a <= -1 and b > -math.inf:
            best = max(best, abs(val) / max(-b, 1.0))
    if best == -math.inf:
        raise ValueError("domain does not meet |u| >= 1")
    return best
