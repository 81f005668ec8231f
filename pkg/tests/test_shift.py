import numpy as np
import pytest
from scipy import integrate

from arratia_lab.functions import IndicatorComb, PiecewiseLinear, hat_family, mollify
from arratia_lab.shift import (
    _mollified_l2_gram,
    apply_shift,
    essential_event,
    find_epsilon0,
    gram_determinant,
    image_inner,
    kernel_entry,
    kernel_form,
    l2_gram,
    relative_determinant,
    unboundedness_probe,
)
from arratia_lab.steps import JumpMeasure, StepMap, dual_snapshot, pushforward_integral


@pytest.fixture
def mu():
    return JumpMeasure([-0.4, 0.05, 0.3, 1.7], [0.5, 1.0, 0.25, 2.0], (-2, 2))


def test_image_norm_is_pushforward_integral():
    x = StepMap([0.5, 1.2], [-0.3, 0.2, 0.9], 0.0, 2.0)
    _, mu = dual_snapshot(x)
    f = PiecewiseLinear([-1.0, 0.0, 1.0], [0.0, 1.0, 0.0])
    img = apply_shift(f, mu)
    assert img.norm_sq == pytest.approx(pushforward_integral(lambda u: f(u) ** 2, x), abs=1e-14)


def test_essential_event_exact(mu):
    assert essential_event(IndicatorComb([0.0, 0.1]), mu)
    assert not essential_event(IndicatorComb([0.4, 1.0]), mu)
    # left-open: an atom at the left end is not covered
    assert not essential_event(IndicatorComb([0.05, 0.1]), mu)
    assert essential_event(IndicatorComb([0.0, 0.05]), mu)
    assert not essential_event(IndicatorComb([0.0, 1.0]), JumpMeasure([], [], (0, 1)))


def test_image_inner_rejects_mismatch(mu):
    other = JumpMeasure([0.0], [1.0], (0, 1))
    f = IndicatorComb([0.0, 1.0])
    with pytest.raises(ValueError):
        image_inner(apply_shift(f, mu), apply_shift(f, other))


def test_kernel_entry_symmetric(mu):
    assert kernel_entry(0.1, 0.7, 0.05, mu) == pytest.approx(kernel_entry(0.7, 0.1, 0.05, mu))
    with pytest.raises(ValueError):
        kernel_entry(0.0, 0.0, 0.0, mu)


def test_kernel_form_against_double_integral(mu):
    # direct 2D quadrature of f(v1) f(v2) K(v1, v2) for a small case
    f = PiecewiseLinear([0.0, 0.5, 1.0], [0.0, 1.0, 0.0])
    eps = 0.1
    val, _ = integrate.dblquad(lambda v2, v1: f(v1) * f(v2) * kernel_entry(v1, v2, eps, mu),
                               0, 1, 0, 1, epsabs=1e-12, epsrel=1e-10)
    assert kernel_form(f, eps, mu) == pytest.approx(val, rel=1e-8)


@pytest.mark.parametrize("eps", [1e-4, 1e-2, 0.5])
def test_kernel_form_matches_image(mu, eps):
    f = IndicatorComb([-0.5, 0.1, 0.2, 0.8])
    img = apply_shift(mollify(f, eps), mu)
    assert kernel_form(f, eps, mu) == pytest.approx(img.norm_sq, rel=1e-12)


def test_relative_determinant():
    g = np.array([[4.0, 2.0], [2.0, 9.0]])
    assert relative_determinant(g) == pytest.approx(np.linalg.det(g) / 36)
    assert relative_determinant(np.array([[1.0, 0.0], [0.0, 0.0]])) == 0.0


def test_gram_duplicate_detected(mu):
    fam = hat_family(2)
    res = gram_determinant(list(fam) + [fam[1]], 0.01, mu)
    assert not res.positive(1e-12)


def test_l2_gram_exact_for_hats():
    fam = hat_family(2)
    g = l2_gram(fam, (0, 1), breaks=np.unique(np.concatenate([f.knots for f in fam])))
    assert np.allclose(np.diag(g), [f.norm_sq() for f in fam], rtol=1e-10)
    assert np.allclose(g - np.diag(np.diag(g)), 0.0, atol=1e-14)


def test_find_epsilon0():
    fam = hat_family(3, "fine-interval")
    s = find_epsilon0(fam, tolerance=1e-6)
    assert 0 < s.eps0 < 1
    assert relative_determinant(_mollified_l2_gram(fam, s.eps0)) > 1e-6
    assert relative_determinant(_mollified_l2_gram(fam, s.eps0 / 2)) > 0
    assert relative_determinant(_mollified_l2_gram(fam, s.eps0 * 1.5)) <= 1e-6


def test_probe_ratio_grows():
    mu = JumpMeasure([0.0, 1.0, 3.0], [1.5, 1.0, 1.0], (-1, 4))
    p = unboundedness_probe(mu, levels=6)
    assert p.theta == 0.0
    assert p.ratios[-1] / p.ratios[0] == pytest.approx(32.0)
