"""Explicit test functions: the indicator comb, hat families, their Gaussian
mollifications in closed form, and the weighted Sobolev energy that defines
the ellipsoid K.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import special

SQRT_LN2 = math.sqrt(math.log(2.0))


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """Continuous piecewise-linear function, zero outside ``[knots[0], knots[-1]]``."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = _readonly(self.knots)
        v = _readonly(self.values)
        if k.ndim != 1 or k.shape != v.shape or k.size < 2:
            raise ValueError("need at least two knots with one value each")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly ascending")
        if v[0] != 0 or v[-1] != 0:
            raise ValueError("end values must vanish for a continuous extension by 0")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    def __call__(self, u):
        return np.interp(u, self.knots, self.values, left=0.0, right=0.0)

    def scaled(self, alpha: float) -> "PiecewiseLinear":
        return PiecewiseLinear(self.knots, alpha * self.values)

    def pieces(self) -> list[tuple[float, float, float, float]]:
        """``(a, b, intercept, slope)`` for every knot interval."""
        out = []
        for a, b, fa, fb in zip(self.knots[:-1], self.knots[1:], self.values[:-1], self.values[1:]):
            slope = (fb - fa) / (b - a)
            out.append((a, b, fa - slope * a, slope))
        return out

    def norm_sq(self) -> float:
        """Exact L2 norm squared (Simpson is exact on quadratics)."""
        total = 0.0
        for a, b, fa, fb in zip(self.knots[:-1], self.knots[1:], self.values[:-1], self.values[1:]):
            total += (b - a) * (fa * fa + fa * fb + fb * fb) / 3.0
        return total


def linear_combination(coeffs: Sequence[float], family: Sequence[PiecewiseLinear]) -> PiecewiseLinear:
    knots = np.unique(np.concatenate([f.knots for f in family]))
    values = sum(c * f(knots) for c, f in zip(coeffs, family))
    values = np.asarray(values, dtype=float)
    values[0] = values[-1] = 0.0
    return PiecewiseLinear(knots, values)


@dataclass(frozen=True, eq=False)
class IndicatorComb:
    """Sum of indicators of disjoint intervals ``[points[2n], points[2n+1]]``.

    Pointwise evaluation uses the left-open representative ``(a, b]``. It is
    the same element of L2, and against the jumps of a right-continuous
    cumulative function it integrates to ``y(b) - y(a)``.
    """

    points: np.ndarray

    def __post_init__(self):
        p = _readonly(self.points)
        if p.ndim != 1 or p.size % 2 or p.size == 0:
            raise ValueError("need an even, positive number of points")
        if np.any(np.diff(p) <= 0):
            raise ValueError("comb points must be strictly ascending")
        object.__setattr__(self, "points", p)

    @classmethod
    def from_pairs(cls, m: int) -> "IndicatorComb":
        return cls(comb_points(m)[: 2 * m])

    @property
    def n_pairs(self) -> int:
        return self.points.size // 2

    @property
    def intervals(self) -> np.ndarray:
        return self.points.reshape(-1, 2)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        j = np.searchsorted(self.points, u, side="left")
        return (j % 2 == 1).astype(float)

    def pieces(self) -> list[tuple[float, float, float, float]]:
        return [(a, b, 1.0, 0.0) for a, b in self.intervals]

    def norm_sq(self) -> float:
        return float(np.sum(self.intervals[:, 1] - self.intervals[:, 0]))


def comb_points(m: int) -> np.ndarray:
    """``u_0, ..., u_{2m+1}`` with ``u_0 = 0``, ``u_1 = 1``,
    ``u_{2n} = u_{2n-1} + 2n sqrt(ln 2)`` and ``u_{2n+1} = u_{2n} + 2^-n``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    u = np.empty(2 * m + 2)
    u[0], u[1] = 0.0, 1.0
    for n in range(1, m + 1):
        u[2 * n] = u[2 * n - 1] + 2 * n * SQRT_LN2
        u[2 * n + 1] = u[2 * n] + 2.0 ** (-n)
    return u


def hat_family(n: int, mode: str = "unit-interval") -> list[PiecewiseLinear]:
    """``n + 1`` trapezoidal hats on alternate segments of ``[0, L]``.

    ``L = 1`` in ``"unit-interval"`` mode and ``L = n**-2`` in
    ``"fine-interval"`` mode. ``[0, L]`` is cut into ``2(n + 1)`` equal
    segments; hat ``k`` lives on segment ``2k``, rises linearly over its first
    third, equals 1 on the middle third and falls over the last third.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if mode == "unit-interval":
        scale = 1.0
    elif mode == "fine-interval":
        if n < 1:
            raise ValueError("fine-interval mode needs n >= 1")
        scale = 1.0 / n**2
    else:
        raise ValueError(f"unknown mode {mode!r}")
    seg = scale / (2 * (n + 1))
    third = scale / (6 * (n + 1))
    out = []
    for k in range(n + 1):
        a = 2 * k * seg
        out.append(
            PiecewiseLinear(
                np.array([a, a + third, a + 2 * third, a + seg]),
                np.array([0.0, 1.0, 1.0, 0.0]),
            )
        )
    return out


def _gauss_window(lo, hi):
    """Phi(hi) - Phi(lo) for lo <= hi without cancellation in the upper tail."""
    upper = lo > 0
    return np.where(
        upper,
        special.ndtr(-lo) - special.ndtr(-hi),
        special.ndtr(hi) - special.ndtr(lo),
    )


class Mollified:
    """``f * p_eps`` for a function made of linear pieces, evaluated exactly.

    With ``sigma = sqrt(eps)`` and ``z = (v - u) / sigma``, a piece
    ``alpha + beta v`` on ``[a, b]`` contributes
    ``(alpha + beta u)(Phi(z_b) - Phi(z_a)) + beta sigma (phi(z_a) - phi(z_b))``.
    """

    def __init__(self, source, eps: float):
        if not eps > 0:
            raise ValueError("eps must be positive")
        self.source = source
        self.eps = float(eps)
        self.sigma = math.sqrt(eps)
        pieces = np.array(source.pieces(), dtype=float).reshape(-1, 4)
        self._a, self._b, self._alpha, self._beta = pieces.T

    def _z(self, u):
        u = np.asarray(u, dtype=float)[..., None]
        return u, (self._a - u) / self.sigma, (self._b - u) / self.sigma

    def __call__(self, u):
        u, za, zb = self._z(u)
        dens_a = np.exp(-0.5 * za * za) / math.sqrt(2 * math.pi)
        dens_b = np.exp(-0.5 * zb * zb) / math.sqrt(2 * math.pi)
        val = (self._alpha + self._beta * u) * _gauss_window(za, zb)
        val = val + self._beta * self.sigma * (dens_a - dens_b)
        return val.sum(axis=-1)

    def derivative(self, u):
        u, za, zb = self._z(u)
        dens_a = np.exp(-0.5 * za * za) / math.sqrt(2 * math.pi)
        dens_b = np.exp(-0.5 * zb * zb) / math.sqrt(2 * math.pi)
        lin = self._alpha + self._beta * u
        val = self._beta * _gauss_window(za, zb)
        val = val + lin * (dens_a - dens_b) / self.sigma
        val = val + self._beta * (za * dens_a - zb * dens_b)
        return val.sum(axis=-1)


def mollify(f, eps: float) -> Mollified:
    return Mollified(f, eps)


def gaussian_density(u, eps: float):
    """Centered normal density with variance eps."""
    u = np.asarray(u, dtype=float)
    return np.exp(-u * u / (2 * eps)) / math.sqrt(2 * math.pi * eps)


# (1 + v)^3, (1 + v)^7 on v >= 0 and their mirror images on v < 0.
_W0_POS = Polynomial([1, 1]) ** 3
_W1_POS = Polynomial([1, 1]) ** 7
_W0_NEG = Polynomial([1, -1]) ** 3
_W1_NEG = Polynomial([1, -1]) ** 7


def _weighted_piece(a, b, alpha, beta) -> float:
    pos = a >= 0
    w0 = _W0_POS if pos else _W0_NEG
    w1 = _W1_POS if pos else _W1_NEG
    f = Polynomial([alpha, beta])
    integrand = (f * f * w0).integ() + (beta * beta * w1).integ()
    return float(integrand(b) - integrand(a))


def sobolev_energy(f: PiecewiseLinear) -> float:
    """``int f^2 (1+|u|)^3 + int f'^2 (1+|u|)^7`` by exact polynomial
    antiderivatives on every piece (pieces are split at 0)."""
    total = 0.0
    for a, b, alpha, beta in f.pieces():
        if a < 0 < b:
            total += _weighted_piece(a, 0.0, alpha, beta)
            total += _weighted_piece(0.0, b, alpha, beta)
        else:
            total += _weighted_piece(a, b, alpha, beta)
    return total


def in_ellipsoid(f: PiecewiseLinear) -> bool:
    return sobolev_energy(f) <= 1.0


def sample_csv(f, u) -> str:
    """Sampled values as ``u,f`` rows for plotting."""
    u = np.asarray(u, dtype=float)
    vals = np.asarray(f(u), dtype=float)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "f"])
    for a, b in zip(u, vals):
        w.writerow([repr(float(a)), repr(float(b))])
    return buf.getvalue()
