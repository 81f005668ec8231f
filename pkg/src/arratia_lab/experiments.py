"""Experiment drivers. Each ``exp_*`` takes an :class:`ExperimentConfig` and
returns a :class:`Report` holding CSV tables, named checks with verdicts and
the oracle values they were judged against.
"""

from __future__ import annotations

import dataclasses
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from arratia_lab import __version__
from arratia_lab.flow import (
    coalescence_cdf,
    simulate_batch,
    simulate_free_wiener_batch,
)
from arratia_lab.functions import (
    IndicatorComb,
    PiecewiseLinear,
    comb_points,
    hat_family,
    mollify,
)
from arratia_lab.rng import derive_seed
from arratia_lab.shift import (
    _mollified_l2_gram,
    apply_shift,
    find_epsilon0,
    gram_determinant,
    kernel_form,
    relative_determinant,
    unboundedness_probe,
)
from arratia_lab.stats import (
    ASSERT_LEVEL,
    McEstimate,
    Tally,
    essentiality_oracles,
    ks_one_sample,
    lemma1_bound,
    lemma1_exact,
    separation_probabilities,
    wilson_interval,
)
from arratia_lab.steps import (
    JumpMeasure,
    cumulative,
    dual_snapshot,
    growth_constant,
    jump_measure,
    pushforward_integral,
    stieltjes_integral,
)
from arratia_lab.widths import (
    LEMMA3_C,
    ball_widths,
    discretize_ellipsoid,
    image_bound,
    lemma3_bounds,
    widths_of_K,
    widths_of_image,
)

EXPERIMENTS = ("coalescence", "duality", "essentiality", "lemma1", "widths", "gram")
PAPER_ESSENTIAL_CONSTANT = 1.0 / math.sqrt(math.pi)

# Per-experiment defaults; any field left as None in the config takes these.
DEFAULTS = {
    "coalescence": dict(replicas=20_000, dt=1e-3, scheme="bridge", t=(0.5, 1.0, 2.0)),
    "duality": dict(replicas=20_000, dt=1e-3, scheme="bridge", t=(0.5, 1.0, 2.0)),
    "essentiality": dict(replicas=20_000, dt=1e-3, scheme="bridge", t=(1.0, 2.0)),
    "lemma1": dict(replicas=50_000, dt=1e-3, scheme="bridge", t=(1.0,)),
    "widths": dict(replicas=100, dt=1e-3, scheme="bridge", t=(1.0,),
                   window=20.0, grid_step=1 / 64),
    "gram": dict(replicas=200, dt=None, scheme="bridge", t=(5e-4,)),
}
COMB_PAIRS_BY_T = {1.0: 30, 2.0: 12}
COALESCENCE_GAPS = (0.0, 0.5, 1.0, 2.0)
LEMMA1_N = (1, 2, 3)
# (a, b) intervals paired with the configured t values, in order
DUALITY_INTERVALS = ((0.0, 0.5), (0.0, 1.0), (-1.0, 1.0))
PATHWISE_PAIRS = 1000
WIDTHS_N_MAX = 50
IMAGE_N_MAX = 30
FLOW_GRID = (-16.0, 16.0, 1 / 16)
GRAM_HATS = 3
GRAM_GRID = (-1.0, 1.125, 1 / 2048)
GRAM_THRESHOLD = 1e-12
GRAM_STEPS = 100
# report-only comparison at a long time, where atoms near the hats are rare
GRAM_LATE = dict(t=1.0, grid=(-8.0, 8.0, 1 / 32), dt=1e-3, replicas=20)
KERNEL_TRIPLES = 100


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    replicas: int | None = None
    seed: int = 20240101
    dt: float | None = None
    scheme: str | None = None
    window: float | None = None
    grid_step: float | None = None
    comb_pairs: int | None = None
    t: tuple[float, ...] | None = None
    eps: float | None = None
    out: str = "results"
    workers: int = 1

    def resolved(self) -> "ExperimentConfig":
        """Copy with experiment defaults filled in and values validated."""
        if self.experiment not in DEFAULTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        fill = {k: v for k, v in DEFAULTS[self.experiment].items() if getattr(self, k) is None}
        cfg = dataclasses.replace(self, **fill)
        if cfg.t is not None:
            cfg = dataclasses.replace(cfg, t=tuple(float(x) for x in cfg.t))
        if cfg.replicas is not None and cfg.replicas < 1:
            raise ConfigError("replicas must be positive")
        if cfg.dt is not None and not cfg.dt > 0:
            raise ConfigError("dt must be positive")
        if cfg.scheme not in (None, "grid", "bridge", "grid-crossing", "bridge-corrected"):
            raise ConfigError(f"unknown scheme {cfg.scheme!r}")
        if cfg.t is not None and (not cfg.t or any(not x > 0 for x in cfg.t)):
            raise ConfigError("t values must be positive")
        if cfg.window is not None and not cfg.window > 0:
            raise ConfigError("window must be positive")
        if cfg.grid_step is not None and not cfg.grid_step > 0:
            raise ConfigError("grid step must be positive")
        if cfg.comb_pairs is not None and cfg.comb_pairs < 1:
            raise ConfigError("comb pairs must be at least 1")
        if cfg.eps is not None and not cfg.eps > 0:
            raise ConfigError("eps must be positive")
        if cfg.workers < 1:
            raise ConfigError("workers must be at least 1")
        return cfg

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["t"] is not None:
            d["t"] = list(d["t"])
        return d


@dataclass
class Table:
    header: list[str]
    rows: list[list] = field(default_factory=list)

    def add(self, *row):
        if len(row) != len(self.header):
            raise ValueError("row length does not match header")
        self.rows.append(list(row))


@dataclass
class Check:
    name: str
    verdict: str  # pass | fail | report-only
    detail: str


@dataclass
class Report:
    experiment: str
    config: ExperimentConfig
    tables: dict[str, Table] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    oracle: dict = field(default_factory=dict)
    estimate: dict | None = None
    notes: list[str] = field(default_factory=list)
    elapsed: float = 0.0

    def check(self, name: str, ok: bool | None, detail: str):
        verdict = "report-only" if ok is None else ("pass" if ok else "fail")
        self.checks.append(Check(name, verdict, detail))

    @property
    def verdict(self) -> str:
        graded = [c.verdict for c in self.checks if c.verdict != "report-only"]
        if not graded:
            return "report-only"
        return "pass" if all(v == "pass" for v in graded) else "fail"

    def verdict_json(self) -> dict:
        est = self.estimate or {}
        return {
            "experiment": self.experiment,
            "params": self.config.as_dict(),
            "seed": self.config.seed,
            "replicas": self.config.replicas,
            "estimate": est.get("estimate"),
            "ci": est.get("ci"),
            "oracle": self.oracle,
            "verdict": self.verdict,
            "checks": [dataclasses.asdict(c) for c in self.checks],
            "notes": self.notes,
            "version": __version__,
            "defaults": {k: list(v) if isinstance(v, tuple) else v
                         for k, v in DEFAULTS[self.experiment].items()},
            "elapsed_seconds": self.elapsed,
        }


def _batch_block(args):
    starts, horizon, dt, scheme, seed, replicas, keep = args
    b = simulate_batch(starts, horizon, dt, scheme, seed, replicas, keep)
    return b.positions, b.labels, b.merge_times


def run_batch(starts, horizon, dt, scheme, seed, replicas: int, keep="final", workers: int = 1):
    """``simulate_batch`` split over a process pool; replica streams make the
    result identical for any worker count."""
    if workers <= 1 or replicas < 2:
        return simulate_batch(starts, horizon, dt, scheme, seed, replicas, keep)
    blocks = np.array_split(np.arange(replicas), min(workers, replicas))
    jobs = [(starts, horizon, dt, scheme, seed, blk, keep) for blk in blocks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_batch_block, jobs))
    base = simulate_batch(starts, horizon, dt, scheme, seed, [0], keep)
    return dataclasses.replace(
        base,
        replicas=np.arange(replicas),
        positions=np.concatenate([p[0] for p in parts]),
        labels=np.concatenate([p[1] for p in parts]),
        merge_times=np.concatenate([p[2] for p in parts]),
    )


def _wiener_block(args):
    return simulate_free_wiener_batch(*args)


def run_free_wieners(starts, horizon, dt, seed, replicas: int, workers: int = 1):
    if workers <= 1 or replicas < 2:
        return simulate_free_wiener_batch(starts, horizon, dt, seed, replicas)
    blocks = np.array_split(np.arange(replicas), min(workers, replicas))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_wiener_block, [(starts, horizon, dt, seed, b) for b in blocks]))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _grid(spec):
    lo, hi, step = spec
    return lo + step * np.arange(int(round((hi - lo) / step)) + 1)


def _timed(fn):
    def wrapper(cfg: ExperimentConfig) -> Report:
        t0 = time.perf_counter()
        rep = fn(cfg.resolved())
        rep.elapsed = time.perf_counter() - t0
        return rep

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def exp_coalescence_cdf(cfg: ExperimentConfig) -> Report:
    """Empirical merge-time CDF of a pair against ``erfc(gap / (2 sqrt t))``."""
    rep = Report("coalescence", cfg)
    n = cfg.replicas
    cells = Table(["gap", "t", "replicas", "merged", "empirical", "analytic", "se",
                   "tolerance", "deviation", "verdict"])
    ks = Table(["gap", "horizon", "uncensored", "statistic", "p_value"])
    horizon = max(cfg.t)
    all_ok = True
    for gap in COALESCENCE_GAPS:
        seed = derive_seed(cfg.seed, f"coalescence/gap={gap!r}")
        b = run_batch([0.0, gap], horizon, cfg.dt, cfg.scheme, seed, n, "final", cfg.workers)
        tau = b.merge_times[:, 0]
        for t in cfg.t:
            k = int(np.sum(tau <= t + 1e-9))
            emp = k / n
            ana = 1.0 if gap == 0 else coalescence_cdf(gap, t)
            se = math.sqrt(ana * (1 - ana) / n)
            tol = 3 * se + 0.005
            ok = abs(emp - ana) <= tol
            all_ok &= ok
            cells.add(gap, t, n, k, emp, ana, se, tol, abs(emp - ana), "pass" if ok else "fail")
        if gap > 0:
            cdf = lambda s, g=gap: special.erfc(g / (2.0 * np.sqrt(s)))  # noqa: E731
            stat, p = ks_one_sample(tau, cdf, horizon)
            ks.add(gap, horizon, int(np.sum(np.isfinite(tau) & (tau <= horizon))), stat, p)
    rep.tables = {"cells": cells, "ks": ks}
    rep.check("cdf-cells", all_ok,
              f"|empirical - analytic| <= 3 SE + 0.005 in all {len(cells.rows)} cells")
    worst_p = min(r[4] for r in ks.rows)
    rep.check("ks", None, f"smallest KS p-value {worst_p:.4g} (censored at horizon {horizon:g})")
    rep.oracle = {"provenance": "erfc(gap / (2 sqrt(t))), first hitting of 0 by a rate-2 Wiener gap",
                  "spot": {"gap=sqrt2,t=1": coalescence_cdf(math.sqrt(2), 1.0)}}
    return rep


def _random_h(rng):
    kind = rng.integers(5)
    a, b = rng.normal(size=2)
    if kind == 0:
        return lambda u: np.sin(a * np.asarray(u) + b)
    if kind == 1:
        c = rng.normal(size=4)
        return lambda u: np.polynomial.polynomial.polyval(np.asarray(u), c)
    if kind == 2:
        lo, hi = np.sort(rng.uniform(-4, 4, 2))
        return lambda u: ((np.asarray(u) > lo) & (np.asarray(u) <= hi)).astype(float)
    if kind == 3:
        return lambda u: np.exp(-(np.asarray(u) - a) ** 2)
    return lambda u: np.abs(np.asarray(u) - b)


@_timed
def exp_duality(cfg: ExperimentConfig) -> Report:
    """Change of variables along random snapshots, and the law of the
    single-cluster event against the pair coalescence CDF."""
    rep = Report("duality", cfg)
    t0 = time.perf_counter()
    rng = np.random.default_rng(derive_seed(cfg.seed, "duality/pathwise"))
    path = Table(["snapshot", "particles", "t", "atoms", "h", "stieltjes", "pushforward", "residual"])
    n_snap, per = 50, PATHWISE_PAIRS // 50
    worst = 0.0
    for s in range(n_snap):
        n_p = int(rng.integers(2, 60))
        starts = np.sort(rng.uniform(-3, 3, n_p))
        t = float(rng.uniform(0.05, 2.0))
        b = simulate_batch(starts, t, 1e-2, cfg.scheme,
                           derive_seed(cfg.seed, f"duality/snapshot={s}"), 1)
        x = b.snapshot(0)
        y, mu = dual_snapshot(x)
        # the cumulative function rebuilt from the measure must be y again
        y2 = cumulative(jump_measure(y), x.lo)
        worst = max(worst, float(np.max(np.abs(y2.values - y.values))))
        for j in range(per):
            h = _random_h(rng)
            lhs = stieltjes_integral(h, mu)
            rhs = pushforward_integral(h, x)
            res = abs(lhs - rhs)
            worst = max(worst, res)
            path.add(s, n_p, t, len(mu), j, lhs, rhs, res)
    pathwise_seconds = time.perf_counter() - t0
    rep.check("pathwise-identity", worst <= 1e-10,
              f"max residual {worst:.3g} over {len(path.rows)} snapshot/h pairs (<= 1e-10) "
              f"in {pathwise_seconds:.1f}s")

    freq = Table(["a", "b", "t", "replicas", "single_cluster", "frequency", "ci99_low",
                  "ci99_high", "analytic", "verdict"])
    all_ok = True
    for (a, bb), t in zip(DUALITY_INTERVALS, cfg.t):
        starts = np.linspace(a, bb, 5)
        seed = derive_seed(cfg.seed, f"duality/interval={a!r},{bb!r},{t!r}")
        batch = run_batch(starts, t, cfg.dt, cfg.scheme, seed, cfg.replicas, "final", cfg.workers)
        single = batch.labels[:, -1, -1] == 0
        k = int(single.sum())
        lo, hi = wilson_interval(k, cfg.replicas, ASSERT_LEVEL)
        ana = coalescence_cdf(bb - a, t)
        ok = lo <= ana <= hi
        all_ok &= ok
        freq.add(a, bb, t, cfg.replicas, k, k / cfg.replicas, lo, hi, ana, "pass" if ok else "fail")
    rep.check("single-cluster-law", all_ok,
              f"analytic value inside the 99% Wilson interval for {len(freq.rows)} intervals")

    refine = Table(["scheme", "dt", "replicas", "frequency", "ci95_low", "ci95_high", "analytic"])
    a, bb = DUALITY_INTERVALS[1]
    t = 1.0
    n_ref = max(1, cfg.replicas // 4)
    for scheme in ("grid", "bridge"):
        for dt in (4e-3, 2e-3, 1e-3):
            seed = derive_seed(cfg.seed, f"duality/refine={scheme},{dt!r}")
            batch = run_batch(np.linspace(a, bb, 5), t, dt, scheme, seed, n_ref, "final", cfg.workers)
            k = int(np.sum(batch.labels[:, -1, -1] == 0))
            lo, hi = wilson_interval(k, n_ref)
            refine.add(scheme, dt, n_ref, k / n_ref, lo, hi, coalescence_cdf(bb - a, t))
    rep.check("grid-refinement", None, "single-cluster frequency against dt for both detection schemes")
    rep.tables = {"pathwise": path, "single_cluster": freq, "refinement": refine}
    rep.oracle = {"provenance": "erfc((b - a) / (2 sqrt(t))) for the single-cluster event",
                  "pathwise_seconds": pathwise_seconds}
    return rep


@_timed
def exp_essentiality(cfg: ExperimentConfig) -> Report:
    """Probability that the comb indicator has a nonzero image.

    ``||T_t f||^2`` is the sum over comb intervals ``[a, b]`` of
    ``y(b, t) - y(a, t)``, the dual flow's separation of the endpoints. The
    dual flow at a fixed time is again an Arratia flow, so the event is
    sampled as "some comb pair has not coalesced by t" for a flow started
    at the comb points.
    """
    rep = Report("essentiality", cfg)
    est = Table(["t", "pairs", "replicas", "essential", "estimate", "se", "ci95_low", "ci95_high",
                 "ci99_low", "ci99_high", "union_bound", "independence_product",
                 "paper_constant"])
    pairs = Table(["t", "pair", "gap", "separated", "frequency", "analytic"])
    results = {}
    for t in cfg.t:
        m = cfg.comb_pairs or COMB_PAIRS_BY_T.get(t, 12)
        starts = comb_points(m)[: 2 * m]
        seed = derive_seed(cfg.seed, f"essentiality/t={t!r},m={m}")
        b = run_batch(starts, t, cfg.dt, cfg.scheme, seed, cfg.replicas, "final", cfg.workers)
        lab = b.labels[:, :, -1]
        sep = lab[:, 1::2] != lab[:, 0::2]
        mc = McEstimate.from_tally(Tally.of(sep.any(axis=1)), cfg.seed, f"essentiality/t={t!r}")
        lo99, hi99 = wilson_interval(mc.successes, mc.trials, ASSERT_LEVEL)
        union, prod = essentiality_oracles(t, m)
        est.add(t, m, mc.trials, mc.successes, mc.estimate, mc.se, mc.ci_low, mc.ci_high,
                lo99, hi99, union, prod, PAPER_ESSENTIAL_CONSTANT)
        analytic = separation_probabilities(t, m)
        for n in range(m):
            k = int(sep[:, n].sum())
            pairs.add(t, n, 2.0**-n, k, k / mc.trials, float(analytic[n]))
        results[t] = (mc, lo99, hi99, union)
        rep.oracle[f"t={t:g}"] = {"pairs": m, "union_bound": union, "independence_product": prod}
    if 2.0 in results:
        mc, _, _, union = results[2.0]
        ok = mc.estimate <= union + 3 * mc.se and mc.estimate <= 0.85
        rep.check("t2-bounded", ok,
                  f"estimate {mc.estimate:.4f} <= union bound {union:.4f} + 3 SE and <= 0.85")
    if 1.0 in results and 2.0 in results:
        a, b = results[1.0], results[2.0]
        ok = a[0].estimate > b[0].estimate and a[1] > b[2]
        rep.check("t1-above-t2", ok,
                  f"t=1: {a[0].estimate:.4f} [{a[1]:.4f}, {a[2]:.4f}] vs "
                  f"t=2: {b[0].estimate:.4f} [{b[1]:.4f}, {b[2]:.4f}] (99% CIs)")
    rep.check("paper-constant", None,
              f"stated constant 1/sqrt(pi) = {PAPER_ESSENTIAL_CONSTANT:.4f}; scaling unconfirmed")
    last = results[max(results)][0]
    rep.estimate = last.as_dict()
    rep.oracle["provenance"] = "sum and product over comb pairs of erfc(2^-n / (2 sqrt t))"
    rep.tables = {"estimates": est, "pairs": pairs}
    return rep


@_timed
def exp_lemma1(cfg: ExperimentConfig) -> Report:
    """Probability that some earlier free path reaches the minimum of path 2n."""
    rep = Report("lemma1", cfg)
    horizon = 1.0
    tab = Table(["n", "replicas", "events", "estimate", "ci95_low", "ci95_high", "bound",
                 "continuous_exact"])
    est = {}
    for n in LEMMA1_N:
        starts = comb_points(n)[: 2 * n + 1]
        seed = derive_seed(cfg.seed, f"lemma1/n={n}")
        mx, mn = run_free_wieners(starts, horizon, cfg.dt, seed, cfg.replicas, cfg.workers)
        hit = mx[:, :-1].max(axis=1) >= mn[:, -1]
        mc = McEstimate.from_tally(Tally.of(hit), cfg.seed, f"lemma1/n={n}")
        tab.add(n, mc.trials, mc.successes, mc.estimate, mc.ci_low, mc.ci_high,
                lemma1_bound(n), lemma1_exact(starts))
        est[n] = mc
    ratios = Table(["n", "ratio"])
    for n in LEMMA1_N[:-1]:
        p0, p1 = est[n].estimate, est[n + 1].estimate
        r = p1 / p0 if p0 > 0 else math.nan
        ratios.add(n, r)
        rep.check(f"decay-{n}-{n + 1}", r <= 0.25, f"p({n + 1}) / p({n}) = {r:.4f} <= 0.25")
    for n in LEMMA1_N:
        rep.check(f"bound-{n}", None,
                  f"estimate {est[n].estimate:.4g} vs stated bound {lemma1_bound(n):.4g}")
    rep.tables = {"estimates": tab, "ratios": ratios}
    rep.estimate = est[LEMMA1_N[0]].as_dict()
    rep.oracle = {"provenance": "bound 1/(2^(n^2) sqrt(pi ln 2)); exact value by quadrature over "
                                "the last path's minimum with half-normal extrema",
                  "bound": {str(n): lemma1_bound(n) for n in LEMMA1_N}}
    rep.notes.append("extrema are taken on the time grid, so estimates sit slightly below the "
                     "continuous-time value")
    return rep


def _ball_check(rep: Report, rng):
    tab = Table(["n", "k", "width", "expected"])
    ok = True
    r = 0.7
    for n in (1, 3, 7):
        a = rng.normal(size=(n + 1, n + 1))
        gram = a @ a.T + (n + 1) * np.eye(n + 1)
        w = ball_widths(gram, r, n_max=n + 1)
        for k in range(n + 2):
            expect = r if k <= n else 0.0
            tab.add(n, k, w[k], expect)
        ok &= bool(np.all(np.abs(w.values[: n + 1] - r) <= 1e-10 * r)) and w[n + 1] <= 1e-8
    rep.check("ball-widths", ok, "d_k = r for k <= n and d_(n+1) <= 1e-8 for n in 1, 3, 7")
    return tab


@_timed
def exp_widths(cfg: ExperimentConfig) -> Report:
    """Widths of K against both bounds, widths of the image of K along
    simulated realizations, ball sanity and the unboundedness probe."""
    rep = Report("widths", cfg)
    E = discretize_ellipsoid(cfg.window, cfg.grid_step)
    wk = widths_of_K(E, WIDTHS_N_MAX)
    n = np.arange(1, WIDTHS_N_MAX + 1)
    lower, upper = lemma3_bounds(n)
    d = wk.values[1:]
    tk = Table(["n", "width", "lower", "upper"])
    for row in zip(n, d, lower, upper):
        tk.add(int(row[0]), *map(float, row[1:]))
    ok = bool(np.all(lower <= d) and np.all(d <= upper))
    rep.check("lemma3-bounds", ok, f"1/(sqrt(c) n) <= d_n(K) <= sqrt(3) n^-0.3 for n = 1..{WIDTHS_N_MAX}")
    E2 = discretize_ellipsoid(cfg.window, cfg.grid_step / 2)
    d1_fine = widths_of_K(E2, 1)[1]
    drift = abs(d1_fine - wk[1]) / wk[1]
    rep.check("self-convergence", drift < 0.01,
              f"d_1 moves by {drift:.3g} (relative) when the grid step is halved")
    rep.notes.append("lower bound uses 1/(sqrt(c) n) as derived in the proof, not C_1 = sqrt(c)")

    rng = np.random.default_rng(derive_seed(cfg.seed, "widths/ball"))
    ball = _ball_check(rep, rng)

    t = cfg.t[0]
    starts = _grid(FLOW_GRID)
    b = run_batch(starts, t, cfg.dt, cfg.scheme, derive_seed(cfg.seed, f"widths/t={t!r}"),
                  cfg.replicas, "final", cfg.workers)
    img = Table(["realization", "n", "width", "bound", "atoms", "growth_constant"])
    probe = Table(["realization", "atom", "width", "ratio"])
    bound_ok = zero_ok = True
    zero_checked = 0
    probe_ratio = []
    ns = np.arange(1, IMAGE_N_MAX + 1)
    for r in range(cfg.replicas):
        y, mu = dual_snapshot(b.snapshot(r))
        c = growth_constant(y)
        mu_r = mu.restrict(-cfg.window, cfg.window)
        w = widths_of_image(E, mu_r, IMAGE_N_MAX)
        bound = image_bound(c, ns)
        vals = w.values[1:]
        bound_ok &= bool(np.all(vals <= bound))
        tail = w.values[len(mu_r):]
        zero_checked += tail.size
        zero_ok &= bool(np.all(tail == 0.0))
        for k in ns:
            img.add(r, int(k), float(vals[k - 1]), float(bound[k - 1]), len(mu_r), c)
        pr = unboundedness_probe(mu_r)
        for wd, ra in zip(pr.widths, pr.ratios):
            probe.add(r, pr.theta, float(wd), float(ra))
        probe_ratio.append(pr.ratios[-1] / pr.ratios[0])
    rep.check("image-bound", bound_ok,
              f"d_n(T_t K) <= sqrt(44 c / 3) n^-0.3 for n <= {IMAGE_N_MAX} in {cfg.replicas} realizations")
    rep.check("image-rank", zero_ok and zero_checked > 0,
              f"d_n(T_t K) == 0 exactly for n >= atom count ({zero_checked} entries)")
    med = float(np.median(probe_ratio))
    rep.check("unbounded-probe", med >= 10, f"median r_5 / r_0 = {med:.3g} over {cfg.replicas} realizations")
    rep.tables = {"widths_K": tk, "ball": ball, "image_widths": img, "probe": probe}
    rep.oracle = {"provenance": "c = 22126.4 and C_2 = sqrt(3) as stated; image bound "
                                "sqrt(44 c(omega) / 3) n^-0.3 with c(omega) the exact growth "
                                "constant of each realization",
                  "c": LEMMA3_C, "d1_fine": d1_fine}
    return rep


def _random_kernel_triple(rng):
    if rng.random() < 0.5:
        k = int(rng.integers(3, 9))
        knots = np.sort(rng.uniform(-3, 3, k))
        vals = rng.normal(size=k)
        vals[0] = vals[-1] = 0.0
        f = PiecewiseLinear(knots, vals)
    else:
        f = IndicatorComb(np.sort(rng.uniform(-3, 3, 2 * int(rng.integers(1, 4)))))
    eps = float(10 ** rng.uniform(-4, 0))
    theta = np.unique(rng.uniform(-3, 3, int(rng.integers(1, 30))))
    mu = JumpMeasure(theta, rng.uniform(0.01, 2.0, theta.size), (-3.0, 3.0))
    return f, eps, mu


@_timed
def exp_gram(cfg: ExperimentConfig) -> Report:
    """Linear independence of the images of mollified hats, plus the kernel
    consistency check."""
    rep = Report("gram", cfg)
    fam = hat_family(GRAM_HATS, "fine-interval")
    search = find_epsilon0(fam, tolerance=1e-6)
    eps = cfg.eps if cfg.eps is not None else search.eps0 / 2
    trace = Table(["eps", "relative_determinant"])
    for e, r in search.trace:
        trace.add(e, r)
    l2_rel = relative_determinant(_mollified_l2_gram(fam, eps))
    rep.check("l2-gram", l2_rel > 0, f"deterministic relative determinant {l2_rel:.3g} at eps = {eps:.4g}")

    t = cfg.t[0]
    dt = cfg.dt if cfg.dt is not None else t / GRAM_STEPS
    starts = _grid(GRAM_GRID)
    b = run_batch(starts, t, dt, cfg.scheme, derive_seed(cfg.seed, f"gram/t={t!r}"),
                  cfg.replicas, "final", cfg.workers)
    dets = Table(["realization", "atoms", "determinant", "relative", "positive"])
    positive = 0
    dup_rel = None
    for r in range(cfg.replicas):
        _, mu = dual_snapshot(b.snapshot(r))
        g = gram_determinant(fam, eps, mu)
        ok = g.positive(GRAM_THRESHOLD)
        positive += ok
        dets.add(r, len(mu), g.determinant, g.relative, int(ok))
        if r == 0:
            dup_rel = gram_determinant(list(fam) + [fam[0]], eps, mu).relative
    rep.check("images-independent", positive == cfg.replicas,
              f"{positive}/{cfg.replicas} relative determinants > {GRAM_THRESHOLD:g} at t = {t:g}")
    late = GRAM_LATE
    n_late = min(late["replicas"], cfg.replicas)
    b = run_batch(_grid(late["grid"]), late["t"], late["dt"], cfg.scheme,
                  derive_seed(cfg.seed, f"gram/t={late['t']!r}"), n_late, "final", cfg.workers)
    late_rel = [gram_determinant(fam, eps, dual_snapshot(b.snapshot(r))[1]).relative
                for r in range(n_late)]
    late_pos = sum(v > GRAM_THRESHOLD for v in late_rel)
    rep.check("images-independent-late", None,
              f"{late_pos}/{n_late} positive at t = {late['t']:g}; largest relative "
              f"determinant {max(late_rel):.3g}")
    rep.check("duplicate-detected", dup_rel <= GRAM_THRESHOLD,
              f"family with a repeated member gives relative determinant {dup_rel:.3g}")

    rng = np.random.default_rng(derive_seed(cfg.seed, "gram/kernel"))
    kern = Table(["triple", "eps", "atoms", "kernel_form", "image_norm_sq", "relative_difference"])
    worst = 0.0
    i = 0
    while i < KERNEL_TRIPLES:
        f, e, mu = _random_kernel_triple(rng)
        q = apply_shift(mollify(f, e), mu).norm_sq
        if q == 0:
            continue
        k = kernel_form(f, e, mu)
        rel = abs(k - q) / q
        worst = max(worst, rel)
        kern.add(i, e, len(mu), k, q, rel)
        i += 1
    rep.check("kernel-consistency", worst <= 1e-12,
              f"max relative difference {worst:.3g} over {KERNEL_TRIPLES} triples (<= 1e-12)")
    rep.tables = {"eps_search": trace, "determinants": dets, "kernel": kern}
    rep.oracle = {"eps0": search.eps0, "eps": eps, "threshold": GRAM_THRESHOLD,
                  "provenance": "eps0 by log-scale bisection on the deterministic L2 Gram "
                                "determinant of the mollified hats"}
    rep.estimate = {"estimate": positive / cfg.replicas,
                    "ci": list(wilson_interval(positive, cfg.replicas))}
    return rep


RUNNERS = {
    "coalescence": exp_coalescence_cdf,
    "duality": exp_duality,
    "essentiality": exp_essentiality,
    "lemma1": exp_lemma1,
    "widths": exp_widths,
    "gram": exp_gram,
}


def run(cfg: ExperimentConfig) -> Report:
    try:
        runner = RUNNERS[cfg.experiment]
    except KeyError:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}") from None
    return runner(cfg)


def run_many(names: Sequence[str], **overrides) -> list[Report]:
    return [run(ExperimentConfig(name, **overrides)) for name in names]
