"""The random shift operator ``(T_t f)(u) = f(x(u, t))`` seen through the
atoms of the pushforward measure.

Everything about ``T_t f`` in L2 is determined by the values ``f(theta_i)``
at the atoms and the atom masses, so norms, inner products, essentiality and
Gram determinants are finite sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from arratia_lab.functions import gaussian_density, mollify
from arratia_lab.steps import JumpMeasure, _evaluate


@dataclass(frozen=True, eq=False)
class OperatorImage:
    measure: JumpMeasure
    values: np.ndarray
    source: str = ""

    @property
    def norm_sq(self) -> float:
        return math.fsum(self.measure.mass * self.values**2)

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm_sq)

    def is_zero(self) -> bool:
        return not np.any(self.values != 0)


def apply_shift(f: Callable, mu: JumpMeasure, source: str = "") -> OperatorImage:
    values = _evaluate(f, mu.theta) if len(mu) else np.zeros(0)
    values.setflags(write=False)
    return OperatorImage(mu, values, source or getattr(f, "__name__", type(f).__name__))


def image_inner(a: OperatorImage, b: OperatorImage) -> float:
    if a.measure is not b.measure and not (
        np.array_equal(a.measure.theta, b.measure.theta)
        and np.array_equal(a.measure.mass, b.measure.mass)
    ):
        raise ValueError("images come from different measures")
    return math.fsum(a.measure.mass * a.values * b.values)


def essential_event(f: Callable, mu: JumpMeasure) -> bool:
    """True iff ``||T_t f|| > 0``, i.e. ``f`` is nonzero at some atom.

    The norm is a finite sum of nonnegative terms, so the test is exact.
    """
    if len(mu) == 0:
        return False
    return bool(np.any(_evaluate(f, mu.theta) != 0))


def _check_eps(eps: float):
    if not eps > 0:
        raise ValueError("eps must be positive")


def kernel_entry(v1: float, v2: float, eps: float, mu: JumpMeasure) -> float:
    """``sum_i p_eps(theta_i - v1) p_eps(theta_i - v2) mass_i``."""
    _check_eps(eps)
    if len(mu) == 0:
        return 0.0
    a = gaussian_density(mu.theta - v1, eps)
    b = gaussian_density(mu.theta - v2, eps)
    return math.fsum(a * b * mu.mass)


def kernel_form(f, eps: float, mu: JumpMeasure) -> float:
    """``(K_eps f, f)``, the double integral of ``f(v1) f(v2)`` against the
    kernel.

    The kernel is a sum over atoms of products, so the double integral is
    ``sum_i mass_i (int f(v) p_eps(theta_i - v) dv)^2``. Each inner integral
    is done numerically (Gauss-Legendre on cells no wider than the kernel
    scale), which keeps this route independent of the closed-form
    mollification.
    """
    _check_eps(eps)
    if len(mu) == 0:
        return 0.0
    sigma = math.sqrt(eps)
    nodes, weights = np.polynomial.legendre.leggauss(_GL_ORDER)
    inner = np.zeros(len(mu))
    for a, b, alpha, beta in f.pieces():
        if alpha == 0 and beta == 0:
            continue
        for i, th in enumerate(mu.theta):
            # the Gaussian is negligible beyond 40 sigma
            lo, hi = max(a, th - 40 * sigma), min(b, th + 40 * sigma)
            if lo >= hi:
                continue
            cuts = np.linspace(lo, hi, int(math.ceil((hi - lo) / sigma)) + 1)
            if lo < th < hi:
                cuts = np.unique(np.r_[cuts, th])
            half = 0.5 * np.diff(cuts)[:, None]
            v = 0.5 * (cuts[1:] + cuts[:-1])[:, None] + half * nodes
            vals = (alpha + beta * v) * gaussian_density(th - v, eps)
            inner[i] += math.fsum((half * weights * vals).ravel())
    return math.fsum(inner * inner * mu.mass)


_GL_ORDER = 24


def image_gram(family: Sequence[Callable], mu: JumpMeasure) -> np.ndarray:
    vals = np.array([_evaluate(f, mu.theta) for f in family]) if len(mu) else np.zeros((len(family), 0))
    weighted = vals * mu.mass
    gram = weighted @ vals.T
    return 0.5 * (gram + gram.T)


def relative_determinant(gram: np.ndarray) -> float:
    """``det(G) / prod(diag(G))``, the determinant of the correlation matrix.

    Zero if any diagonal entry vanishes. Computed from the eigenvalues of the
    diagonally scaled matrix so that tiny values are resolved relative to 1.
    """
    d = np.diag(gram).copy()
    if np.any(d <= 0):
        return 0.0
    s = 1.0 / np.sqrt(d)
    corr = gram * s[:, None] * s[None, :]
    ev = np.linalg.eigvalsh(corr)
    return float(np.prod(ev))


@dataclass
class GramResult:
    gram: np.ndarray
    determinant: float
    relative: float

    def positive(self, threshold: float = 1e-12) -> bool:
        return self.relative > threshold


def gram_determinant(family: Sequence, eps: float, mu: JumpMeasure) -> GramResult:
    """Gram matrix of the images of the mollified family and its determinant."""
    if len(family) == 0:
        raise ValueError("family must be nonempty")
    _check_eps(eps)
    mollified = [mollify(f, eps) for f in family]
    gram = image_gram(mollified, mu)
    return GramResult(gram, float(np.linalg.det(gram)), relative_determinant(gram))


def l2_gram(functions: Sequence[Callable], support: tuple[float, float], breaks=()) -> np.ndarray:
    """Deterministic L2 Gram matrix by adaptive quadrature over ``support``.

    All entries are integrated together as one vector-valued integrand.
    """
    n = len(functions)
    lo, hi = support
    iu = np.triu_indices(n)

    def integrand(v):
        vals = np.array([float(f(v)) for f in functions])
        return np.outer(vals, vals)[iu]

    pts = sorted(p for p in breaks if lo < p < hi)
    total, _ = integrate.quad_vec(
        integrand, lo, hi, epsabs=1e-16, epsrel=1e-11, limit=2000, points=pts or None
    )
    gram = np.empty((n, n))
    gram[iu] = total
    gram.T[iu] = total
    return gram


@dataclass
class EpsilonSearch:
    eps0: float
    tolerance: float
    trace: list = field(default_factory=list)  # (eps, relative determinant)


def _mollified_l2_gram(family, eps):
    mollified = [mollify(f, eps) for f in family]
    knots = np.concatenate([np.asarray(f.knots) for f in family])
    pad = 12.0 * math.sqrt(eps)
    lo, hi = knots.min() - pad, knots.max() + pad
    return l2_gram(mollified, (lo, hi), breaks=np.unique(knots))


def find_epsilon0(
    family: Sequence,
    tolerance: float = 1e-6,
    bracket: tuple[float, float] = (1e-8, 1.0),
    iterations: int = 30,
) -> EpsilonSearch:
    """Largest eps (found by bisection in log-scale) whose mollified family
    still has an L2 Gram determinant above ``tolerance`` times the diagonal
    product.

    If the relative determinant is not monotone in eps the search restarts
    from the lowest failing scan point, so the result always passes.
    """
    lo, hi = bracket
    trace = []

    def rel(eps):
        r = relative_determinant(_mollified_l2_gram(family, eps))
        trace.append((eps, r))
        return r

    if rel(lo) <= tolerance:
        raise RuntimeError(f"no eps in [{lo:g}, {hi:g}] passes; trace={trace}")
    if rel(hi) > tolerance:
        return EpsilonSearch(hi, tolerance, trace)
    a, b = math.log(lo), math.log(hi)
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        if rel(math.exp(mid)) > tolerance:
            a = mid
        else:
            b = mid
    eps0 = math.exp(a)
    # guard against non-monotone behaviour below eps0
    scan = np.geomspace(lo, eps0, 8)
    for e in scan:
        if rel(e) <= tolerance:
            return find_epsilon0(family, tolerance, (lo, float(e)), iterations)
    return EpsilonSearch(eps0, tolerance, trace)


@dataclass
class ProbeResult:
    theta: float
    widths: np.ndarray
    ratios: np.ndarray


def unboundedness_probe(mu: JumpMeasure, levels: int = 6, width0: float = 1.0) -> ProbeResult:
    """``||T_t 1_A||^2 / |A|`` on intervals ``A`` shrinking around the
    heaviest atom; the ratio blows up like ``1 / |A|`` once ``A`` isolates it.
    """
    if len(mu) == 0:
        raise ValueError("empty measure")
    star = float(mu.theta[int(np.argmax(mu.mass))])
    widths = width0 * 0.5 ** np.arange(levels)
    ratios = np.array([mu.mass_in(star - w / 2, star + w / 2) / w for w in widths])
    return ProbeResult(star, widths, ratios)
