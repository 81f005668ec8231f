import math

import numpy as np
import pytest

from arratia_lab.flow import simulate_batch
from arratia_lab.steps import JumpMeasure, dual_snapshot
from arratia_lab.widths import (
    LEMMA3_C,
    ball_widths,
    discretize_ellipsoid,
    image_bound,
    lemma3_bounds,
    projection_residual,
    single_atom_width,
    widths_from_forms,
    widths_of_K,
    widths_of_image,
)


@pytest.fixture(scope="module")
def E():
    return discretize_ellipsoid(20.0, 1 / 16)


def test_constants():
    assert LEMMA3_C == pytest.approx(22126.4)
    lo, up = lemma3_bounds(np.array([1.0, 2.0]))
    assert up[0] == pytest.approx(math.sqrt(3))
    assert lo[1] == pytest.approx(1 / (math.sqrt(22126.4) * 2))


def test_unweighted_closed_form():
    R, h = 5.0, 1 / 64
    E = discretize_ellipsoid(R, h, weighted=False)
    w = widths_of_K(E, 6)
    k = np.arange(1, 8)
    exact = (1 + (k * math.pi / (2 * R)) ** 2) ** -0.5
    assert np.allclose(w.values, exact, rtol=1e-4)
    # P1 elements: the eigenvalue error falls like h^2
    fine = widths_of_K(discretize_ellipsoid(R, h / 2, weighted=False), 6)
    ratio = np.abs(w.values - exact)[-1] / np.abs(fine.values - exact)[-1]
    assert 3.5 < ratio < 4.5


def test_widths_decreasing_and_in_bounds(E):
    w = widths_of_K(E, 20)
    assert np.all(np.diff(w.values) <= 0)
    lo, up = lemma3_bounds(np.arange(1, 21))
    assert np.all(w.values[1:] >= lo) and np.all(w.values[1:] <= up)


def test_scaling_and_permutation_invariance(E):
    w = widths_of_K(E, 5).values
    assert np.allclose(widths_of_K(E.scaled(3.0), 5).values, 3 * w, rtol=1e-10)
    perm = np.random.default_rng(0).permutation(E.size)
    assert np.allclose(widths_of_K(E.permuted(perm), 5).values, w, rtol=1e-9)


def test_sparse_and_dense_agree(E, monkeypatch):
    import arratia_lab.widths as W

    dense = widths_of_K(E, 5).values
    monkeypatch.setattr(W, "DENSE_LIMIT", 10)
    sparse_vals = widths_of_K(E, 5).values
    assert np.allclose(dense, sparse_vals, rtol=1e-8)


def test_certificates(E):
    w = widths_from_forms(E.form, E.mass, 3, certificates=True)
    v = w.certificates[:, 0]
    # top eigenvector attains d_0 after normalizing to the K form
    v = v / math.sqrt(v @ (E.form @ v))
    assert math.sqrt(v @ (E.mass @ v)) == pytest.approx(w[0], rel=1e-8)


@pytest.mark.parametrize("n", [1, 3, 7])
def test_ball_widths(n):
    rng = np.random.default_rng(n)
    a = rng.normal(size=(n + 1, n + 1))
    g = a @ a.T + np.eye(n + 1)
    w = ball_widths(g, 0.5, n_max=n + 2)
    assert np.allclose(w.values[: n + 1], 0.5, rtol=1e-10)
    assert w[n + 1] == 0.0 and w[n + 2] == 0.0


def test_ball_rejects_rank_deficient():
    with pytest.raises(ValueError):
        ball_widths(np.ones((2, 2)), 1.0)


def test_single_atom_agrees(E):
    mu = JumpMeasure([0.37], [0.8], (-20, 20))
    w = widths_of_image(E, mu, 4)
    assert w[0] == pytest.approx(single_atom_width(E, 0.37, 0.8), rel=1e-9)
    assert np.all(w.values[1:] == 0.0)


def test_image_widths_rank_and_bound(E):
    starts = np.arange(-8, 8 + 1e-9, 1 / 8)
    b = simulate_batch(starts, 1.0, 1e-2, "bridge", 3, 2)
    for r in range(2):
        y, mu = dual_snapshot(b.snapshot(r))
        from arratia_lab.steps import growth_constant

        w = widths_of_image(E, mu, 30)
        assert np.all(w.values[len(mu):] == 0.0)
        assert np.all(w.values[1:] <= image_bound(growth_constant(y), np.arange(1, 31)))


def test_projection_residual_dominates_width(E):
    w = widths_of_K(E, 4)
    for n in (1, 2, 4):
        assert projection_residual(E, n) >= w[n] ** 2 * (1 - 1e-9)
    mu = JumpMeasure([-0.5, 0.2, 0.9], [1.0, 0.5, 0.7], (-2, 2))
    wi = widths_of_image(E, mu, 3)
    assert projection_residual(E, 2, mu) >= wi[2] ** 2 * (1 - 1e-9)


def test_discretize_rejects():
    with pytest.raises(ValueError):
        discretize_ellipsoid(1.0, 0.3)
    with pytest.raises(ValueError):
        discretize_ellipsoid(-1.0, 0.01)
