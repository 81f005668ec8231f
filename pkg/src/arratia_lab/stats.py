"""Monte Carlo bookkeeping: tallies, Wilson intervals, KS tests and the
closed-form oracles built from the pair coalescence law."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from arratia_lab.flow import coalescence_cdf

REPORT_LEVEL = 0.95
ASSERT_LEVEL = 0.99


def wilson_interval(k: int, n: int, level: float = REPORT_LEVEL) -> tuple[float, float]:
    if n < 1:
        raise ValueError("need at least one trial")
    if not 0 <= k <= n:
        raise ValueError("successes must lie in [0, trials]")
    z = stats.norm.ppf(0.5 + level / 2)
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class Tally:
    """Success count over trials; combine with ``+`` in any order."""

    successes: int = 0
    trials: int = 0

    def __add__(self, other: "Tally") -> "Tally":
        return Tally(self.successes + other.successes, self.trials + other.trials)

    @classmethod
    def of(cls, flags) -> "Tally":
        flags = np.asarray(flags, dtype=bool)
        return cls(int(flags.sum()), int(flags.size))


@dataclass(frozen=True)
class McEstimate:
    successes: int
    trials: int
    estimate: float
    ci_low: float
    ci_high: float
    level: float
    master_seed: int
    experiment_id: str

    @classmethod
    def from_tally(cls, tally: Tally, seed: int, experiment_id: str,
                   level: float = REPORT_LEVEL) -> "McEstimate":
        lo, hi = wilson_interval(tally.successes, tally.trials, level)
        return cls(tally.successes, tally.trials, tally.successes / tally.trials,
                   lo, hi, level, seed, experiment_id)

    @property
    def se(self) -> float:
        """Binomial standard error at the point estimate."""
        p = self.estimate
        return math.sqrt(p * (1 - p) / self.trials)

    def as_dict(self) -> dict:
        return {
            "successes": self.successes,
            "trials": self.trials,
            "estimate": self.estimate,
            "ci": [self.ci_low, self.ci_high],
            "level": self.level,
            "se": self.se,
        }


def ks_one_sample(samples, cdf: Callable, horizon: float | None = None) -> tuple[float, float]:
    """One-sample KS statistic and asymptotic p-value.

    With ``horizon`` given, samples beyond it (or non-finite ones) are treated
    as right-censored: the remaining samples are compared with the law
    conditioned on ``<= horizon``, i.e. ``cdf(s) / cdf(horizon)``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no samples")
    if horizon is not None:
        x = x[np.isfinite(x) & (x <= horizon)]
        mass = float(cdf(horizon))
        if x.size == 0 or mass <= 0:
            raise ValueError("no uncensored samples")
        target = lambda s: np.minimum(np.asarray(cdf(s), dtype=float) / mass, 1.0)  # noqa: E731
    else:
        target = cdf
    if x.size < 10:
        raise ValueError("need at least 10 samples")
    res = stats.kstest(x, target, method="asymp")
    return float(res.statistic), float(res.pvalue)


def separation_probabilities(t: float, m: int) -> np.ndarray:
    """``P{pair n has not coalesced by t}`` for comb pairs of width ``2^-n``."""
    return np.array([1.0 - coalescence_cdf(2.0**-n, t) for n in range(m)])


def essentiality_oracles(t: float, m: int) -> tuple[float, float]:
    """Union bound and independence product for ``P{some comb pair stays
    separated up to t}``, both from the pair coalescence law alone."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if not t > 0:
        raise ValueError("t must be positive")
    sep = separation_probabilities(t, m)
    union = math.fsum(sep)
    product = 1.0 - float(np.prod(1.0 - sep))
    return union, product


def lemma1_bound(n: int) -> float:
    return 1.0 / (2.0 ** (n * n) * math.sqrt(math.pi * math.log(2.0)))


def lemma1_exact(starts: Sequence[float]) -> float:
    """Continuous-time probability that ``max_j max_s w_j >= min_s w_last``
    for independent Wiener paths on ``[0, 1]`` from ``starts``.

    The running max (min) of a Wiener path over ``[0, 1]`` is distributed as
    its start plus (minus) ``|N(0, 1)|``; integrate over the last path's
    minimum.
    """
    from scipy import integrate

    s = np.asarray(starts, dtype=float)
    others, last = s[:-1], s[-1]

    def integrand(m):
        level = last - m
        below = np.prod(2.0 * stats.norm.cdf(np.maximum(level - others, 0.0)) - 1.0)
        return 2.0 * stats.norm.pdf(m) * (1.0 - below)

    val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val
