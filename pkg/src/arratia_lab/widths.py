"""Kolmogorov widths of the weighted Sobolev ellipsoid

    K = {f : int f^2 (1+|u|)^3 + int f'^2 (1+|u|)^7 <= 1}

and of its images under the shift operator.

K is discretized with continuous piecewise-linear elements on a uniform grid
of ``[-R, R]`` with zero boundary values. In a Hilbert space the widths of
an ellipsoid ``{v : v'Fv <= 1}`` measured in a semi-norm ``v'Qv`` are
``d_n = sqrt(nu_{n+1})`` where ``nu_1 >= nu_2 >= ...`` are the eigenvalues
of ``Q`` relative to ``F``; the first ``n`` eigenvectors span an optimal
subspace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as sparse_linalg

from arratia_lab.steps import JumpMeasure

# Gauss-Legendre rule with 5 nodes: exact for polynomials of degree <= 9,
# which covers (1+|u|)^7 * const and (1+|u|)^3 * quadratic on each element.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)

LEMMA3_C = 2**3 * (5 + 2**9 * 3**3) / 5
UPPER_C2 = math.sqrt(3.0)

# Above this many unknowns the generalized problem is solved with sparse
# shift-invert Lanczos instead of the dense Cholesky reduction.
DENSE_LIMIT = 4000


def weight_mass(u):
    return (1.0 + np.abs(u)) ** 3


def weight_stiff(u):
    return (1.0 + np.abs(u)) ** 7


def _unit(u):
    return np.ones_like(u)


@dataclass(frozen=True, eq=False)
class DiscretizedEllipsoid:
    """``form`` is the K quadratic form and ``mass`` the L2 Gram matrix on the
    interior nodal basis (both tridiagonal, stored sparse)."""

    radius: float
    step: float
    nodes: np.ndarray
    form: sparse.csr_matrix
    mass: sparse.csr_matrix
    weighted: bool = True
    scale: float = 1.0

    @property
    def size(self) -> int:
        return self.nodes.size

    def scaled(self, alpha: float) -> "DiscretizedEllipsoid":
        """The ellipsoid ``alpha * K``."""
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        return replace(self, form=self.form / alpha**2, scale=self.scale * alpha)

    def permuted(self, perm: np.ndarray) -> "DiscretizedEllipsoid":
        """Same ellipsoid with the basis listed in a different order."""
        p = np.asarray(perm)
        return replace(
            self,
            nodes=self.nodes[p],
            form=self.form[p][:, p].tocsr(),
            mass=self.mass[p][:, p].tocsr(),
        )

    def basis_at(self, points) -> sparse.csr_matrix:
        """Values of every basis function at ``points`` (one row per point)."""
        pts = np.asarray(points, dtype=float).ravel()
        if np.any(np.abs(pts) > self.radius):
            raise ValueError("points outside the discretization window")
        full = np.linspace(-self.radius, self.radius, self.size + 2)
        k = np.clip(np.searchsorted(full, pts, side="right") - 1, 0, self.size)
        frac = (pts - full[k]) / self.step
        # full-grid index j is interior node j - 1 in sorted order
        order = np.argsort(self.nodes)
        rows = np.repeat(np.arange(pts.size), 2)
        j = np.stack([k, k + 1], axis=1).ravel()
        w = np.stack([1.0 - frac, frac], axis=1).ravel()
        ok = (j >= 1) & (j <= self.size) & (w != 0.0)
        cols = order[np.clip(j - 1, 0, self.size - 1)]
        return sparse.csr_matrix(
            (w[ok], (rows[ok], cols[ok])), shape=(pts.size, self.size)
        )

    @cached_property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of the dense form matrix."""
        try:
            return linalg.cholesky(_dense(self.form), lower=True)
        except linalg.LinAlgError as exc:
            raise EigenSolverError(f"form matrix is not positive definite: {exc}") from exc

    @cached_property
    def whitened_mass(self) -> np.ndarray:
        """``L^-1 M L^-T`` with ``F = L L'``."""
        X = linalg.solve_triangular(self.chol, _dense(self.mass), lower=True)
        W = linalg.solve_triangular(self.chol, X.T, lower=True)
        return 0.5 * (W + W.T)


def discretize_ellipsoid(radius: float = 20.0, step: float = 1 / 64, weighted: bool = True) -> DiscretizedEllipsoid:
    """Assemble the K form and the mass matrix on ``[-radius, radius]``.

    ``weighted=False`` replaces both weights by 1 (form = mass + stiffness),
    which has closed-form eigenvalues ``1 + (k pi / 2R)^2``.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if not (0 < step <= radius / 10):
        raise ValueError("need 0 < step <= radius / 10")
    n_el = int(round(2 * radius / step))
    if n_el < 2 or not math.isclose(n_el * step, 2 * radius, rel_tol=1e-9):
        raise ValueError("2 * radius must be an integer multiple of step")
    full = np.linspace(-radius, radius, n_el + 1)
    w0, w1 = (weight_mass, weight_stiff) if weighted else (_unit, _unit)

    # per-element quadrature, split at 0 when 0 is not a node
    a_el, b_el = full[:-1], full[1:]
    m00 = np.zeros(n_el)
    m01 = np.zeros(n_el)
    m11 = np.zeros(n_el)
    s = np.zeros(n_el)
    for lo, hi in _split_at_zero(a_el, b_el):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        x = mid[:, None] + half[:, None] * _GL_X
        wq = half[:, None] * _GL_W
        phi1 = (x - a_el[:, None]) / step
        phi0 = 1.0 - phi1
        wm = w0(x) * wq
        m00 += np.sum(wm * phi0 * phi0, axis=1)
        m01 += np.sum(wm * phi0 * phi1, axis=1)
        m11 += np.sum(wm * phi1 * phi1, axis=1)
        s += np.sum(w1(x) * wq, axis=1) / step**2

    def assemble(d0, d1, off):
        n = n_el + 1
        diag = np.zeros(n)
        diag[:-1] += d0
        diag[1:] += d1
        mat = sparse.diags([off, diag, off], [-1, 0, 1], shape=(n, n), format="csr")
        return mat[1:-1, 1:-1].tocsr()

    mass = assemble(m00, m11, m01)
    stiff = assemble(s, s, -s)
    return DiscretizedEllipsoid(
        radius=float(radius),
        step=float(step),
        nodes=full[1:-1].copy(),
        form=(mass + stiff).tocsr(),
        mass=mass,
        weighted=weighted,
    )


def _split_at_zero(a, b):
    straddle = (a < 0) & (b > 0)
    if not straddle.any():
        return [(a, b)]
    lo1, hi1 = a.copy(), np.where(straddle, 0.0, b)
    lo2, hi2 = np.where(straddle, 0.0, b), b.copy()
    return [(lo1, hi1), (lo2, hi2)]


@dataclass
class WidthSequence:
    values: np.ndarray
    certificates: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return self.values.size

    def __getitem__(self, n):
        return self.values[n]


class EigenSolverError(RuntimeError):
    pass


def _dense(m):
    return m.toarray() if sparse.issparse(m) else np.asarray(m, dtype=float)


def _smallest_generalized(form, mass, count):
    """Smallest ``count`` eigenpairs of ``form v = lam mass v``."""
    n = form.shape[0]
    if n <= DENSE_LIMIT:
        try:
            lam, vec = linalg.eigh(_dense(form), _dense(mass), subset_by_index=[0, count - 1])
        except linalg.LinAlgError as exc:
            raise EigenSolverError(f"dense generalized eigensolve failed: {exc}; "
                                   f"cond(mass)~{np.linalg.cond(_dense(mass)):.3g}") from exc
        return lam, vec
    lam, vec = sparse_linalg.eigsh(
        sparse.csc_matrix(form), k=count, M=sparse.csc_matrix(mass), sigma=0.0, which="LM"
    )
    order = np.argsort(lam)
    return lam[order], vec[:, order]


def widths_from_forms(form, mass, n_max: int, certificates: bool = False) -> WidthSequence:
    """``d_0..d_{n_max}`` of ``{v : v'Fv <= 1}`` in the norm ``v'Mv``."""
    n = form.shape[0]
    if not 0 <= n_max < n:
        raise ValueError("n_max must be smaller than the number of unknowns")
    lam, vec = _smallest_generalized(form, mass, n_max + 1)
    if np.any(lam <= 0):
        raise EigenSolverError("form is not positive definite on the discrete space")
    return WidthSequence(lam ** -0.5, vec if certificates else None)


def widths_of_K(E: DiscretizedEllipsoid, n_max: int = 50, certificates: bool = False) -> WidthSequence:
    seq = widths_from_forms(E.form, E.mass, n_max, certificates)
    seq.provenance = {"radius": E.radius, "step": E.step, "nodes": E.size,
                      "weighted": E.weighted, "scale": E.scale}
    return seq


def lemma3_bounds(n):
    """``(1 / (sqrt(c) n), sqrt(3) n^-0.3)`` for the widths of K."""
    n = np.asarray(n, dtype=float)
    return 1.0 / (math.sqrt(LEMMA3_C) * n), UPPER_C2 * n ** -0.3


def _orthonormal_gram_factor(gram, tol=1e-12):
    gram = 0.5 * (gram + gram.T)
    ev = np.linalg.eigvalsh(gram)
    if ev[0] <= tol * max(ev[-1], 0.0) or ev[-1] <= 0:
        raise ValueError("basis is rank deficient")
    return np.linalg.cholesky(gram)


def ball_widths(gram, radius: float, n_max: int | None = None) -> WidthSequence:
    """Widths of the L2 ball of radius ``radius`` in the span of a basis
    whose L2 Gram matrix is ``gram``.

    The ball is the ellipsoid ``c'(G / r^2)c <= 1`` measured in ``c'Gc``, so
    it goes through the same relative eigenproblem as K; widths past the
    dimension of the span are zero.
    """
    gram = np.asarray(gram, dtype=float)
    _orthonormal_gram_factor(gram)
    dim = gram.shape[0]
    n_max = dim if n_max is None else n_max
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    out = np.zeros(n_max + 1)
    if radius > 0:
        lam = linalg.eigh(gram / radius**2, gram, eigvals_only=True)
        k = min(dim, n_max + 1)
        out[:k] = lam[:k] ** -0.5
    return WidthSequence(out, provenance={"dimension": dim, "radius": radius})


def _atom_factor(E: DiscretizedEllipsoid, mu: JumpMeasure):
    """``S`` with ``S'S = Q`` (the atomic form) in the coordinates that make
    the K form the identity. Returns ``S`` of shape ``(atoms, nodes)``."""
    if len(mu) and (mu.theta.min() < -E.radius or mu.theta.max() > E.radius):
        raise ValueError("atoms outside the discretization window; restrict the measure first")
    B = E.basis_at(mu.theta).toarray() * np.sqrt(mu.mass)[:, None]
    # S = B L^{-T}
    return linalg.solve_triangular(E.chol, B.T, lower=True).T


def widths_of_image(E: DiscretizedEllipsoid, mu: JumpMeasure, n_max: int = 30) -> WidthSequence:
    """Widths of ``T_t(K)``: ``d_n`` is the ``(n+1)``-th singular value of
    the atom-evaluation map in K-whitened coordinates; exactly zero from
    ``n = len(mu)`` on."""
    out = np.zeros(n_max + 1)
    if len(mu):
        S = _atom_factor(E, mu)
        sv = linalg.svd(S, compute_uv=False)
        k = min(sv.size, n_max + 1)
        out[:k] = sv[:k]
    return WidthSequence(out, provenance={"radius": E.radius, "step": E.step, "atoms": len(mu)})


def single_atom_width(E: DiscretizedEllipsoid, theta: float, mass: float) -> float:
    """``sup{sqrt(mass) |f(theta)| : f in K}`` via one linear solve with the
    form matrix (independent of the SVD route)."""
    b = E.basis_at([theta]).toarray()[0]
    z = sparse_linalg.spsolve(sparse.csc_matrix(E.form), b)
    return math.sqrt(mass * float(b @ z))


def _indicator_coupling(E: DiscretizedEllipsoid, edges: np.ndarray) -> np.ndarray:
    """``C[k, j] = int_{segment k} phi_j``, exact: the basis is linear between
    consecutive points of the merged element/segment grid, so the trapezoid
    rule integrates it without error."""
    full = np.linspace(-E.radius, E.radius, E.size + 2)
    out = np.zeros((edges.size - 1, E.size))
    for k in range(edges.size - 1):
        a, b = edges[k], edges[k + 1]
        pts = np.unique(np.concatenate(([a, b], full[(full > a) & (full < b)])))
        vals = E.basis_at(pts).toarray()
        out[k] = (0.5 * (vals[1:] + vals[:-1]) * np.diff(pts)[:, None]).sum(axis=0)
    return out


def projection_residual(E: DiscretizedEllipsoid, n: int, mu: JumpMeasure | None = None) -> float:
    """Worst squared distance from K to the span of the indicators of ``n``
    equal segments of ``[-n^(1/5), n^(1/5)]``.

    Without ``mu`` the distance is in L2. With ``mu`` it is in the atomic
    semi-norm ``sum_i mass_i f(theta_i)^2``, i.e. the distance from ``T_t K``
    to the span of the images of the indicators.
    """
    if n < 1:
        raise ValueError("n must be positive")
    edges = np.linspace(-(n ** 0.2), n ** 0.2, n + 1)
    if edges[-1] > E.radius:
        raise ValueError("partition exceeds the discretization window")
    L = E.chol
    if mu is None:
        C = _indicator_coupling(E, edges)
        Y = linalg.solve_triangular(L, (C / np.sqrt(np.diff(edges))[:, None]).T, lower=True)
        A0 = E.whitened_mass
        op = sparse_linalg.LinearOperator(
            A0.shape, matvec=lambda v: A0 @ v - Y @ (Y.T @ v), dtype=float
        )
        top = sparse_linalg.eigsh(op, k=1, which="LA", tol=1e-12,
                                  v0=np.ones(A0.shape[0]))[0]
        return float(top[0])
    if len(mu) == 0:
        return 0.0
    w = mu.mass
    seg = np.searchsorted(edges, mu.theta, side="right") - 1
    seg[mu.theta == edges[-1]] = n - 1
    # H = W - sum_k w_k w_k' / g_k, with w_k the weights of atoms in segment k
    H = np.diag(w)
    for k in np.unique(seg[(seg >= 0) & (seg < n)]):
        sel = seg == k
        wk = np.where(sel, w, 0.0)
        H -= np.outer(wk, wk) / wk.sum()
    X = linalg.solve_triangular(L, E.basis_at(mu.theta).toarray().T, lower=True)
    P = X.T @ X
    ev, U = np.linalg.eigh(0.5 * (H + H.T))
    root = (U * np.sqrt(np.clip(ev, 0.0, None))) @ U.T
    return float(np.linalg.eigvalsh(root @ P @ root)[-1])


def image_bound(c_omega: float, n):
    """``sqrt(44 c / 3) n^-0.3`` for the widths of ``T_t(K)``."""
    n = np.asarray(n, dtype=float)
    return math.sqrt(44.0 * c_omega / 3.0) * n ** -0.3
