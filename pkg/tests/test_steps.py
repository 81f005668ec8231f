import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arratia_lab.steps import (
    JumpMeasure,
    StepMap,
    cumulative,
    dual_snapshot,
    growth_constant,
    jump_measure,
    pushforward_integral,
    stieltjes_integral,
)


def test_stepmap_right_continuous():
    x = StepMap([1.0, 2.0], [10.0, 20.0, 30.0], 0.0, 3.0)
    assert x(0.0) == 10.0
    assert x(1.0) == 20.0
    assert x(1.999) == 20.0
    assert x(3.0) == 30.0
    with pytest.raises(ValueError):
        x(3.5)


def test_stepmap_validation():
    with pytest.raises(ValueError):
        StepMap([2.0, 1.0], [0, 1, 2], 0, 3)
    with pytest.raises(ValueError):
        StepMap([1.0], [0.0], 0, 3)
    with pytest.raises(ValueError):
        StepMap([0.0], [0.0, 1.0], 0, 3)


def test_dual_snapshot_simple():
    x = StepMap([1.0, 1.5], [-0.2, 0.4, 0.4], 0.0, 2.0)
    y, mu = dual_snapshot(x)
    assert np.array_equal(mu.theta, [-0.2, 0.4])
    assert np.allclose(mu.mass, [1.0, 1.0])
    assert y(-1.0) == 0.0
    assert y(-0.2) == 1.0
    assert y(0.4) == 2.0


def test_dual_snapshot_drops_degenerate_last_piece():
    x = StepMap([1.0, 2.0], [0.0, 1.0, 5.0], 0.0, 2.0)
    _, mu = dual_snapshot(x)
    assert np.array_equal(mu.theta, [0.0, 1.0])


def test_dual_snapshot_rejects():
    with pytest.raises(ValueError):
        dual_snapshot(StepMap([1.0], [1.0, 0.0], 0.0, 2.0))
    with pytest.raises(ValueError):
        dual_snapshot(StepMap([1.0], [0.0, 1.0], -math.inf, 2.0))


def test_single_cluster():
    x = StepMap([], [0.7], -1.0, 1.0)
    y, mu = dual_snapshot(x)
    assert len(mu) == 1 and mu.mass[0] == 2.0


def _monotone_stepmaps():
    @st.composite
    def build(draw):
        n = draw(st.integers(1, 12))
        # a grid of 1/64 keeps piece lengths well above rounding level
        cuts = sorted(set(draw(st.lists(st.integers(-320, 320), min_size=n, max_size=n))))
        cuts = [c / 64 for c in cuts]
        lo = cuts[0] - 1.0
        hi = cuts[-1] + draw(st.one_of(st.just(0.0), st.floats(1e-3, 2.0)))
        bps = [c for c in cuts if lo < c <= hi]
        inc = draw(st.lists(st.floats(0.0, 3.0), min_size=len(bps) + 1, max_size=len(bps) + 1))
        vals = np.cumsum(inc) - 2.0
        return StepMap(np.array(bps), vals, lo, hi)

    return build()


@settings(max_examples=200, deadline=None)
@given(_monotone_stepmaps(), st.floats(-3, 3), st.floats(-3, 3))
def test_change_of_variables_property(x, a, b):
    h = lambda u: np.sin(a * np.asarray(u)) + b * np.asarray(u) ** 2  # noqa: E731
    _, mu = dual_snapshot(x)
    assert stieltjes_integral(h, mu) == pytest.approx(pushforward_integral(h, x), abs=1e-10)
    assert mu.total_mass == pytest.approx(x.hi - x.lo, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(_monotone_stepmaps())
def test_cumulative_roundtrip(x):
    y, mu = dual_snapshot(x)
    back = jump_measure(cumulative(mu, x.lo))
    assert np.array_equal(back.theta, mu.theta)
    assert np.allclose(back.mass, mu.mass, rtol=0, atol=1e-12)
    assert np.allclose(cumulative(mu, x.lo).values, y.values, atol=1e-12)


def test_jump_measure_serialization_roundtrip():
    mu = JumpMeasure([-1.0, 0.1 + 0.2, math.pi], [0.5, 1 / 3, 2.0], (-2.0, 4.0))
    back = JumpMeasure.from_csv(mu.to_csv())
    assert np.array_equal(back.theta, mu.theta) and np.array_equal(back.mass, mu.mass)
    back = JumpMeasure.from_json(mu.to_json())
    assert np.array_equal(back.theta, mu.theta) and back.window == mu.window


def test_jump_measure_validation():
    with pytest.raises(ValueError):
        JumpMeasure([0.0, 0.0], [1.0, 1.0], (0, 1))
    with pytest.raises(ValueError):
        JumpMeasure([0.0], [0.0], (0, 1))


def test_mass_in_and_restrict():
    mu = JumpMeasure([-1.0, 0.0, 2.0], [1.0, 2.0, 3.0], (-5, 5))
    assert mu.mass_in(-1.0, 0.0) == 3.0
    assert len(mu.restrict(-0.5, 5)) == 2


def test_growth_constant():
    y = StepMap([-2.0, 3.0], [-4.0, 1.0, 6.0], -math.inf, math.inf)
    # pieces: (-inf,-2): |-4|/2 ; [-2,3): 1/1 on both sides ; [3,inf): 6/3
    assert growth_constant(y) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        growth_constant(StepMap([], [1.0], -0.5, 0.5))
