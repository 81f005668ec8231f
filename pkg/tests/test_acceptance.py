"""Acceptance suite: every criterion at its stated scale and tolerance.

Each experiment runs once at its default configuration; the per-criterion
tests read the checks out of the resulting reports. One pass/fail line per
criterion is printed in the terminal summary.
"""

import pytest

from arratia_lab.experiments import ExperimentConfig, run

SEED = 20240101
_cache = {}


def report(name):
    if name not in _cache:
        _cache[name] = run(ExperimentConfig(name, seed=SEED))
    return _cache[name]


def checks(name, *which):
    rep = report(name)
    found = {c.name: c for c in rep.checks}
    return [found[w] for w in which]


def judge(pytestconfig, number, title, ok, detail):
    lines = pytestconfig.stash.setdefault(ACCEPTANCE_KEY, [])
    lines.append(f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
    print(lines[-1])
    assert ok, detail


ACCEPTANCE_KEY = pytest.StashKey[list]()


def _all_pass(cs):
    return all(c.verdict == "pass" for c in cs), "; ".join(c.detail for c in cs)


def test_c01_coalescence_cdf(pytestconfig):
    rep = report("coalescence")
    (c,) = checks("coalescence", "cdf-cells")
    ok = c.verdict == "pass" and rep.elapsed <= 120
    judge(pytestconfig, 1, "coalescence CDF", ok, f"{c.detail}; runtime {rep.elapsed:.1f}s <= 120s")


def test_c02_pathwise_change_of_variables(pytestconfig):
    rep = report("duality")
    (c,) = checks("duality", "pathwise-identity")
    secs = rep.oracle["pathwise_seconds"]
    judge(pytestconfig, 2, "pathwise change of variables", c.verdict == "pass" and secs < 10, c.detail)


def test_c03_distributional_duality(pytestconfig):
    ok, detail = _all_pass(checks("duality", "single-cluster-law"))
    judge(pytestconfig, 3, "distributional duality", ok, detail)


def test_c04_not_essential_at_t2(pytestconfig):
    ok, detail = _all_pass(checks("essentiality", "t2-bounded"))
    judge(pytestconfig, 4, "comb at t=2 bounded away from 1", ok, detail)


def test_c05_t1_above_t2(pytestconfig):
    ok, detail = _all_pass(checks("essentiality", "t1-above-t2"))
    judge(pytestconfig, 5, "essential probability t=1 vs t=2", ok, detail)


def test_c06_lemma1_decay(pytestconfig):
    ok, detail = _all_pass(checks("lemma1", "decay-1-2", "decay-2-3"))
    judge(pytestconfig, 6, "free-path event decay", ok, detail)


def test_c07_widths_of_K(pytestconfig):
    ok, detail = _all_pass(checks("widths", "lemma3-bounds", "self-convergence"))
    judge(pytestconfig, 7, "widths of K within both bounds", ok, detail)


def test_c08_ball_widths(pytestconfig):
    ok, detail = _all_pass(checks("widths", "ball-widths"))
    judge(pytestconfig, 8, "ball widths", ok, detail)


def test_c09_image_widths(pytestconfig):
    ok, detail = _all_pass(checks("widths", "image-bound", "image-rank"))
    judge(pytestconfig, 9, "widths of the image of K", ok, detail)


def test_c10_gram_positive(pytestconfig):
    ok, detail = _all_pass(checks("gram", "l2-gram", "images-independent"))
    judge(pytestconfig, 10, "Gram determinants of images", ok, detail)


def test_c11_unboundedness_probe(pytestconfig):
    ok, detail = _all_pass(checks("widths", "unbounded-probe"))
    judge(pytestconfig, 11, "unboundedness probe", ok, detail)


def test_c12_kernel_consistency(pytestconfig):
    ok, detail = _all_pass(checks("gram", "kernel-consistency"))
    judge(pytestconfig, 12, "kernel consistency", ok, detail)
