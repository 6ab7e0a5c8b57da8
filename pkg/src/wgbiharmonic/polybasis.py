"""Polynomial bases, quadrature and L2 projections on triangles and edges.

Triangle bases are scaled monomials ``((x - x_c)/h)^a ((y - y_c)/h)^b``
ordered by total degree, so the first ``dim P_r`` functions of a degree-k
basis span ``P_r`` for every ``r <= k``. Edge bases are Legendre
polynomials in the edge parameter ``t in [-1, 1]`` running from the lower
to the higher global vertex index.

Functions taking element data broadcast over leading axes: pass one
element or a whole stack of them.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy.special import roots_jacobi

from .errors import DegenerateElementError

MAX_DEGREE = 40
MASS_COND_LIMIT = 1e12


def tri_dim(r: int) -> int:
    return (r + 1) * (r + 2) // 2 if r >= 0 else 0


@lru_cache(maxsize=None)
def monomial_exponents(r: int) -> np.ndarray:
    """Exponent pairs (a, b), grouped by total degree a + b <= r."""
    return np.array([(d - b, b) for d in range(r + 1) for b in range(d + 1)], dtype=int).reshape(-1, 2)


# ---------------------------------------------------------------- quadrature
@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def tri_quadrature(degree: int) -> QuadratureRule:
    """Collapsed Gauss rule on the reference triangle (0,0), (1,0), (0,1).

    Gauss-Legendre in one direction times Gauss-Jacobi(1, 0) in the
    other, exact for total degree ``degree``. Weights sum to 1/2.
    """
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"triangle quadrature degree must be in [0, {MAX_DEGREE}], got {degree}")
    n = degree // 2 + 1
    s, ws = legendre.leggauss(n)
    t, wt = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (1.0 + s)
    v = 0.5 * (1.0 + t)
    U, V = np.meshgrid(u, v, indexing="ij")
    points = np.column_stack([(U * (1.0 - V)).ravel(), V.ravel()])
    weights = (0.5 * ws[:, None] * 0.25 * wt[None, :]).ravel()
    return QuadratureRule(points, weights, degree)


@lru_cache(maxsize=None)
def edge_quadrature(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [-1, 1] with ceil((degree+1)/2) points."""
    if degree < 0 or degree > 2 * MAX_DEGREE:
        raise ValueError(f"edge quadrature degree out of range: {degree}")
    n = max(1, -(-(degree + 1) // 2))
    x, w = legendre.leggauss(n)
    return QuadratureRule(x, w, degree)


def map_tri_rule(rule: QuadratureRule, coords: np.ndarray):
    """Physical points (..., nq, 2) and weights (..., nq) for triangles (..., 3, 2)."""
    coords = np.asarray(coords, dtype=float)
    p0 = coords[..., 0, :]
    J = np.stack([coords[..., 1, :] - p0, coords[..., 2, :] - p0], axis=-1)  # (..., 2, 2)
    pts = p0[..., None, :] + np.einsum("...ij,qj->...qi", J, rule.points)
    det = np.abs(J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0])
    return pts, det[..., None] * rule.weights


def map_edge_rule(rule: QuadratureRule, a: np.ndarray, b: np.ndarray):
    """Points (..., nq, 2) and weights (..., nq) on segments a -> b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid[..., None, :] + rule.points[:, None] * half[..., None, :]
    length = np.linalg.norm(b - a, axis=-1)
    return pts, 0.5 * length[..., None] * rule.weights


# ------------------------------------------------------------------- bases
@dataclass(frozen=True)
class TriBasis:
    """Scaled monomial basis of P_r on one or more triangles."""

    centroid: np.ndarray  # (..., 2)
    h: np.ndarray  # (...)
    degree: int

    @classmethod
    def on(cls, coords, degree: int) -> "TriBasis":
        coords = np.asarray(coords, dtype=float)
        d = coords - np.roll(coords, -1, axis=-2)
        h = np.linalg.norm(d, axis=-1).max(axis=-1)
        return cls(coords.mean(axis=-2), h, degree)

    @property
    def dim(self) -> int:
        return tri_dim(self.degree)


def eval_tri(basis: TriBasis, points):
    """Values, gradients and Laplacians of every basis function.

    ``points`` has shape (..., nq, 2) with the same leading axes as the
    basis. Returns arrays (..., nq, dim), (..., nq, dim, 2), (..., nq, dim).
    """
    points = np.asarray(points, dtype=float)
    h = np.asarray(basis.h, dtype=float)[..., None]
    s = (points - np.asarray(basis.centroid)[..., None, :]) / h[..., None]
    r = basis.degree
    sx = s[..., 0, None] ** np.arange(r + 1)  # (..., nq, r+1)
    sy = s[..., 1, None] ** np.arange(r + 1)
    ex = monomial_exponents(r)
    a, b = ex[:, 0], ex[:, 1]
    am1, bm1 = np.maximum(a - 1, 0), np.maximum(b - 1, 0)
    am2, bm2 = np.maximum(a - 2, 0), np.maximum(b - 2, 0)

    vals = sx[..., a] * sy[..., b]
    hq = h[..., None]
    gx = a * sx[..., am1] * sy[..., b] / hq
    gy = b * sx[..., a] * sy[..., bm1] / hq
    lap = (a * (a - 1) * sx[..., am2] * sy[..., b] + b * (b - 1) * sx[..., a] * sy[..., bm2]) / hq**2
    return vals, np.stack([gx, gy], axis=-1), lap


@dataclass(frozen=True)
class EdgeBasis:
    """Legendre basis of P_r on a segment a -> b."""

    a: np.ndarray
    b: np.ndarray
    degree: int

    @property
    def dim(self) -> int:
        return self.degree + 1

    @property
    def length(self):
        return np.linalg.norm(np.asarray(self.b) - np.asarray(self.a), axis=-1)

    def mass_diagonal(self):
        j = np.arange(self.dim)
        return np.asarray(self.length)[..., None] / (2 * j + 1)


def eval_edge(degree: int, t) -> np.ndarray:
    """Legendre values P_0..P_degree at parameters t, shape (..., degree+1)."""
    return legendre.legvander(np.asarray(t, dtype=float), degree)


# ---------------------------------------------------------------- projection
def mass_matrix(vals, weights) -> np.ndarray:
    return np.einsum("...q,...qi,...qj->...ij", weights, vals, vals)


def check_mass(M, offset=0, ids=None):
    """Raise on mass matrices whose conditioning signals a degenerate element.

    The reported element is ``ids[i]`` when given, else ``offset + i``.
    """
    cond = np.linalg.cond(M)
    bad = np.flatnonzero(~(np.atleast_1d(cond) < MASS_COND_LIMIT))
    if bad.size:
        el = int(ids[bad[0]]) if ids is not None else int(bad[0]) + offset
        raise DegenerateElementError(f"element {el}: mass matrix condition number {np.atleast_1d(cond)[bad[0]]:.3e}", el)


def project_tri(f, r: int, coords, quad_degree: int | None = None) -> np.ndarray:
    """L2 projection of f(x, y) onto P_r on the triangle(s) ``coords``.

    Returns coefficients in the scaled monomial basis of :func:`TriBasis.on`.
    """
    coords = np.asarray(coords, dtype=float)
    basis = TriBasis.on(coords, r)
    rule = tri_quadrature(quad_degree if quad_degree is not None else 2 * r + 4)
    pts, w = map_tri_rule(rule, coords)
    vals, _, _ = eval_tri(basis, pts)
    M = mass_matrix(vals, w)
    check_mass(M)
    fq = np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float)
    rhs = np.einsum("...q,...q,...qi->...i", w, fq, vals)
    return np.linalg.solve(M, rhs[..., None])[..., 0]


def eval_tri_poly(coeffs, coords, points) -> np.ndarray:
    """Evaluate a projected polynomial (from :func:`project_tri`) at points."""
    coeffs = np.asarray(coeffs)
    r = int(round((np.sqrt(8 * coeffs.shape[-1] + 1) - 3) / 2))
    vals, _, _ = eval_tri(TriBasis.on(coords, r), points)
    return np.einsum("...qi,...i->...q", vals, coeffs)


def project_edge(f, r: int, a, b, quad_degree: int | None = None) -> np.ndarray:
    """Legendre coefficients of the L2 projection of f onto P_r(a -> b).

    The edge mass matrix is diagonal, so c_j = (2j+1)/|e| <f, P_j>_e.
    """
    rule = edge_quadrature(quad_degree if quad_degree is not None else 2 * r + 4)
    pts, _ = map_edge_rule(rule, a, b)
    fq = np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float)
    P = eval_edge(r, rule.points)
    j = np.arange(r + 1)
    return 0.5 * (2 * j + 1) * np.einsum("q,...q,qj->...j", rule.weights, fq, P)


def eval_edge_poly(coeffs, t) -> np.ndarray:
    coeffs = np.asarray(coeffs)
    return np.einsum("...j,qj->...q", coeffs, eval_edge(coeffs.shape[-1] - 1, t))
