"""PNG figures drawn from report tables (headless backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from arratia_lab.experiments import Report  # noqa: E402


def _col(tab, name):
    return np.array([r[tab.header.index(name)] for r in tab.rows])


def _coalescence(rep, ax):
    cells = rep.tables["cells"]
    gap, t = _col(cells, "gap"), _col(cells, "t")
    for g in np.unique(gap):
        sel = gap == g
        ax.plot(t[sel], _col(cells, "analytic")[sel], "-", color="0.6")
        ax.errorbar(t[sel], _col(cells, "empirical")[sel], yerr=3 * _col(cells, "se")[sel],
                    fmt="o", ms=4, capsize=2, label=f"gap {g:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("P(merged by t)")
    ax.legend(fontsize=8)


def _duality(rep, ax):
    ref = rep.tables["refinement"]
    sch = _col(ref, "scheme")
    for s in np.unique(sch):
        sel = sch == s
        dt = _col(ref, "dt")[sel].astype(float)
        f = _col(ref, "frequency")[sel].astype(float)
        lo = _col(ref, "ci95_low")[sel].astype(float)
        hi = _col(ref, "ci95_high")[sel].astype(float)
        ax.errorbar(dt, f, yerr=[f - lo, hi - f], fmt="o-", capsize=2, label=s)
    ax.axhline(float(_col(ref, "analytic")[0]), color="k", lw=0.8, ls="--", label="analytic")
    ax.set_xscale("log")
    ax.set_xlabel("dt")
    ax.set_ylabel("single-cluster frequency")
    ax.legend(fontsize=8)


def _essentiality(rep, ax):
    est = rep.tables["estimates"]
    t = _col(est, "t")
    p = _col(est, "estimate")
    ax.errorbar(t, p, yerr=[p - _col(est, "ci99_low"), _col(est, "ci99_high") - p],
                fmt="o", capsize=3, label="estimate (99% CI)")
    ax.plot(t, _col(est, "union_bound"), "v", label="union bound")
    ax.plot(t, _col(est, "independence_product"), "^", label="independence product")
    ax.axhline(_col(est, "paper_constant")[0], color="0.5", ls=":", label="1/sqrt(pi)")
    ax.set_xlabel("t")
    ax.set_ylabel("P(essential)")
    ax.legend(fontsize=8)


def _lemma1(rep, ax):
    est = rep.tables["estimates"]
    n = _col(est, "n")
    ax.semilogy(n, _col(est, "estimate"), "o-", label="estimate")
    ax.semilogy(n, _col(est, "bound"), "s--", label="stated bound")
    ax.semilogy(n, _col(est, "continuous_exact"), "x:", label="continuous exact")
    ax.set_xlabel("n")
    ax.set_ylabel("probability")
    ax.legend(fontsize=8)


def _widths(rep, ax):
    tk = rep.tables["widths_K"]
    n = _col(tk, "n")
    ax.loglog(n, _col(tk, "width"), "o", ms=3, label="d_n(K)")
    ax.loglog(n, _col(tk, "lower"), "--", label="lower")
    ax.loglog(n, _col(tk, "upper"), "--", label="upper")
    img = rep.tables["image_widths"]
    sel = _col(img, "realization") == 0
    w = _col(img, "width")[sel]
    pos = w > 0
    ax.loglog(_col(img, "n")[sel][pos], w[pos], ".-", label="d_n(T_t K), first realization")
    ax.loglog(_col(img, "n")[sel], _col(img, "bound")[sel], ":", label="image bound")
    ax.set_xlabel("n")
    ax.legend(fontsize=7)


def _gram(rep, ax):
    rel = _col(rep.tables["determinants"], "relative").astype(float)
    ax.hist(np.log10(np.maximum(rel, 1e-300)), bins=30)
    ax.axvline(-12, color="r", ls="--", label="threshold")
    ax.set_xlabel("log10 relative determinant")
    ax.set_ylabel("realizations")
    ax.legend(fontsize=8)


_DRAW = {
    "coalescence": _coalescence,
    "duality": _duality,
    "essentiality": _essentiality,
    "lemma1": _lemma1,
    "widths": _widths,
    "gram": _gram,
}


def render(rep: Report, out_dir) -> list[Path]:
    draw = _DRAW.get(rep.experiment)
    if draw is None:
        return []
    fig, ax = plt.subplots(figsize=(5.5, 4))
    try:
        draw(rep, ax)
        ax.set_title(f"{rep.experiment}: {rep.verdict}")
        fig.tight_layout()
        path = Path(out_dir) / f"{rep.experiment}.png"
        fig.savefig(path, dpi=110)
    finally:
        plt.close(fig)
    return [path]
