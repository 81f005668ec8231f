import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from arratia_lab.flow import coalescence_cdf, simulate_batch
from arratia_lab.functions import comb_points
from arratia_lab.stats import (
    McEstimate,
    Tally,
    essentiality_oracles,
    ks_one_sample,
    lemma1_bound,
    lemma1_exact,
    wilson_interval,
)


def test_wilson_examples():
    assert wilson_interval(0, 10)[0] == 0.0
    assert wilson_interval(10, 10)[1] == 1.0
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.404, abs=5e-4) and hi == pytest.approx(0.596, abs=5e-4)
    with pytest.raises(ValueError):
        wilson_interval(0, 0)
    with pytest.raises(ValueError):
        wilson_interval(5, 3)


@given(st.integers(1, 5000), st.data())
def test_wilson_contains_point(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = wilson_interval(k, n, 0.99)
    assert 0 <= lo <= k / n <= hi <= 1


def test_tally_merge_order():
    rng = np.random.default_rng(0)
    parts = [Tally.of(rng.random(50) < 0.3) for _ in range(8)]
    a = sum(parts, Tally())
    b = sum(reversed(parts), Tally())
    assert a == b
    ea = McEstimate.from_tally(a, 1, "x")
    assert ea == McEstimate.from_tally(b, 1, "x")
    assert ea.ci_low <= ea.estimate <= ea.ci_high


def test_ks_calibration():
    rng = np.random.default_rng(2024)
    passes = sum(ks_one_sample(rng.normal(size=200), stats.norm.cdf)[1] > 0.01 for _ in range(100))
    assert passes >= 98


def test_ks_constant_samples():
    stat, _ = ks_one_sample(np.zeros(50), lambda x: stats.norm.cdf(x, scale=1e-6))
    assert stat == pytest.approx(0.5, abs=1e-3)
    stat, _ = ks_one_sample(np.full(50, 10.0), stats.norm.cdf)
    assert stat == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ks_one_sample([], stats.norm.cdf)


def test_ks_censored_coalescence_times():
    from scipy import special

    b = simulate_batch([0.0, 1.0], 2.0, 1e-3, "bridge", 77, 3000)
    tau = b.merge_times[:, 0]
    _, p = ks_one_sample(tau, lambda s: special.erfc(1.0 / (2 * np.sqrt(s))), horizon=2.0)
    assert p > 0.01


def test_essentiality_oracles():
    u, p = essentiality_oracles(2.0, 12)
    assert u == pytest.approx(0.78, abs=5e-3)
    single = max(1 - coalescence_cdf(2.0**-n, 2.0) for n in range(12))
    assert u >= p >= single
    u1, p1 = essentiality_oracles(1.3, 1)
    assert u1 == pytest.approx(p1)
    u, p = essentiality_oracles(1e12, 12)
    assert u < 1e-5 and p < 1e-5


def test_lemma1_bound_values():
    assert lemma1_bound(1) == pytest.approx(0.3389, abs=1e-4)
    assert lemma1_bound(2) == pytest.approx(0.0424, abs=1e-4)


def test_lemma1_exact_single_pair():
    # P{max w_0 >= min w_1} for two paths from 0 and d: difference of two
    # independent half-normals exceeds -d
    d = 1.0
    rng = np.random.default_rng(1)
    m = np.abs(rng.normal(size=(2, 400_000)))
    mc = np.mean(m[0] + m[1] >= d)
    assert lemma1_exact([0.0, d]) == pytest.approx(mc, abs=3e-3)
    assert lemma1_exact(comb_points(1)[:3]) == pytest.approx(0.44598, abs=1e-4)


def test_se_property():
    e = McEstimate.from_tally(Tally(25, 100), 0, "x")
    assert e.se == pytest.approx(math.sqrt(0.25 * 0.75 / 100))
