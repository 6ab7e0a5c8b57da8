"""Element-level weak Galerkin operators for the biharmonic problem.

Local DOF ordering on a triangle is ``[v_0 | e0: v_b, v_n | e1: ... | e2: ...]``
with ``v_0`` in the scaled monomial basis of P_k and ``v_b``, ``v_n`` as
Legendre coefficients of P_{k-1} on the globally parametrized edge.
``v_n`` approximates the derivative along the global edge normal ``n_e``;
inside an element it is multiplied by ``sigma = n_T . n_e``.

Everything here is batched over a selection of elements of a mesh.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh
from .polybasis import (
    TriBasis,
    check_mass,
    edge_quadrature,
    eval_edge,
    eval_tri,
    map_tri_rule,
    mass_matrix,
    tri_dim,
    tri_quadrature,
)


@dataclass(frozen=True)
class ElementDofLayout:
    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"order k must be >= 2, got {self.k}")

    @property
    def n0(self) -> int:
        return tri_dim(self.k)

    @property
    def n_lap(self) -> int:
        """dim P_{k-2}, the space of the discrete weak Laplacian."""
        return tri_dim(self.k - 2)

    @property
    def n_edge(self) -> int:
        """DOFs per edge and per trace variable (dim P_{k-1}(e))."""
        return self.k

    @property
    def n_local(self) -> int:
        return self.n0 + 6 * self.k

    def vb(self, l: int) -> slice:
        start = self.n0 + 2 * self.k * l
        return slice(start, start + self.k)

    def vn(self, l: int) -> slice:
        start = self.n0 + 2 * self.k * l + self.k
        return slice(start, start + self.k)


@dataclass
class LocalOperators:
    """Batched local matrices for the elements in ``elements``.

    ``L`` holds the moments of the weak Laplacian against the P_{k-2}
    basis, so that ``Delta_w v = M^{-1} L v``.
    """

    layout: ElementDofLayout
    elements: np.ndarray
    L: np.ndarray  # (ne, n_lap, n_local)
    M: np.ndarray  # (ne, n_lap, n_lap)
    S: np.ndarray  # (ne, n_local, n_local)
    A: np.ndarray  # (ne, n_local, n_local)
    F: np.ndarray | None = None  # (ne, n_local)


def _edge_data(mesh: Mesh, elements, k: int, degree: int):
    """Quadrature on the three edges of each element, in edge parameter t."""
    rule = edge_quadrature(degree)
    E = mesh.tri_edges[elements]  # (ne, 3)
    a = mesh.vertices[mesh.edges[E, 0]]
    b = mesh.vertices[mesh.edges[E, 1]]
    pts = 0.5 * (a + b)[:, :, None, :] + rule.points[:, None] * (0.5 * (b - a))[:, :, None, :]
    lengths = mesh.edge_lengths[E]  # (ne, 3)
    w = 0.5 * lengths[..., None] * rule.weights  # (ne, 3, nq)
    P = eval_edge(k - 1, rule.points)  # (nq, k)
    return rule, E, pts, w, lengths, P


def local_operators(mesh: Mesh, k: int, elements=None, f=None, load_degree=None) -> LocalOperators:
    layout = ElementDofLayout(k)
    elements = np.arange(mesh.n_triangles) if elements is None else np.atleast_1d(elements)
    ne = len(elements)
    n0, m, nloc = layout.n0, layout.n_lap, layout.n_local
    coords = mesh.tri_coords[elements]
    h = mesh.diameters[elements]
    basis = TriBasis(mesh.centroids[elements], h, k)

    pts, w = map_tri_rule(tri_quadrature(2 * k), coords)
    phi, _, lap = eval_tri(basis, pts)
    # the P_k mass matrix is exact at this degree and exposes slivers even for k = 2
    check_mass(mass_matrix(phi, w), ids=elements)
    M = mass_matrix(phi[..., :m], w)

    L = np.zeros((ne, m, nloc))
    L[:, :, :n0] = np.einsum("eq,eqi,eqj->eij", w, lap[..., :m], phi)

    _, E, epts, ew, lengths, P = _edge_data(mesh, elements, k, 2 * k)
    n_out = mesh.outward_normals[elements]  # (ne, 3, 2)
    n_e = mesh.edge_normals[E]  # (ne, 3, 2)
    sigma = mesh.tri_signs[elements]
    jw = 0.5 * (2 * np.arange(k) + 1)  # (2j+1)/|e| times the |e|/2 in the weights

    S = np.zeros((ne, nloc, nloc))
    for l in range(3):
        ephi, egrad, _ = eval_tri(basis, epts[:, l])
        w_l = ew[:, l]
        dn_out = np.einsum("eqix,ex->eqi", egrad[..., :m, :], n_out[:, l])
        L[:, :, layout.vb(l)] = -np.einsum("eq,eqi,qj->eij", w_l, dn_out, P)
        L[:, :, layout.vn(l)] = sigma[:, l, None, None] * np.einsum("eq,eqi,qj->eij", w_l, ephi[..., :m], P)

        # Legendre coefficients of Q_b v_0 and of grad v_0 . n_e
        ref_w = w_l / (0.5 * lengths[:, l, None])
        B = jw[:, None] * np.einsum("eq,qj,eqi->eji", ref_w, P, ephi)
        dn_e = np.einsum("eqix,ex->eqi", egrad, n_e[:, l])
        G = jw[:, None] * np.einsum("eq,qj,eqi->eji", ref_w, P, dn_e)

        Rb = np.zeros((ne, k, nloc))
        Rb[:, :, :n0] = B
        Rb[:, :, layout.vb(l)] = -np.eye(k)
        Rn = np.zeros((ne, k, nloc))
        Rn[:, :, :n0] = G
        Rn[:, :, layout.vn(l)] = -np.eye(k)
        D = lengths[:, l, None] / (2 * np.arange(k) + 1)  # Legendre edge mass
        S += np.einsum("eji,ej,ejk->eik", Rb, D / h[:, None] ** 3, Rb)
        S += np.einsum("eji,ej,ejk->eik", Rn, D / h[:, None], Rn)

    C = np.linalg.cholesky(M)
    X = np.linalg.solve(C, L)
    A = np.einsum("eji,ejk->eik", X, X) + S

    F = None
    if f is not None:
        F = np.zeros((ne, nloc))
        F[:, :n0] = local_load_interior(mesh, k, f, elements, load_degree)
    return LocalOperators(layout, elements, L, M, S, A, F)


def local_load_interior(mesh: Mesh, k: int, f, elements=None, degree=None) -> np.ndarray:
    """(f, phi_i)_T for the P_k basis functions; shape (ne, n0)."""
    elements = np.arange(mesh.n_triangles) if elements is None else np.atleast_1d(elements)
    coords = mesh.tri_coords[elements]
    basis = TriBasis(mesh.centroids[elements], mesh.diameters[elements], k)
    pts, w = map_tri_rule(tri_quadrature(degree if degree is not None else 2 * k + 4), coords)
    phi, _, _ = eval_tri(basis, pts)
    fq = np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float)
    fq = np.broadcast_to(fq, w.shape)
    return np.einsum("eq,eq,eqi->ei", w, fq, phi)


# ---- single-element entry points ------------------------------------------
def weak_laplacian_matrix(mesh: Mesh, t: int, layout: ElementDofLayout):
    """Return (L, M) for element t: Delta_w v = M^{-1} L v in the P_{k-2} basis."""
    ops = local_operators(mesh, layout.k, [t])
    return ops.L[0], ops.M[0]


def stabilizer_matrix(mesh: Mesh, t: int, layout: ElementDofLayout) -> np.ndarray:
    return local_operators(mesh, layout.k, [t]).S[0]


def local_stiffness(mesh: Mesh, t: int, layout: ElementDofLayout) -> np.ndarray:
    return local_operators(mesh, layout.k, [t]).A[0]


def local_load(mesh: Mesh, t: int, f, layout: ElementDofLayout, degree=None) -> np.ndarray:
    F = np.zeros(layout.n_local)
    F[: layout.n0] = local_load_interior(mesh, layout.k, f, [t], degree)[0]
    return F


def weak_laplacian(mesh: Mesh, k: int, v_local, elements=None) -> np.ndarray:
    """P_{k-2} coefficients of Delta_w v for local DOF vectors (ne, n_local)."""
    ops = local_operators(mesh, k, elements)
    return np.linalg.solve(ops.M, np.einsum("eij,ej->ei", ops.L, v_local)[..., None])[..., 0]


# ---- projection Q_h ----------------------------------------------------------
def project_interior(mesh: Mesh, k: int, u, elements=None, degree=None) -> np.ndarray:
    """Q_0 u on each element, (ne, n0) coefficients."""
    elements = np.arange(mesh.n_triangles) if elements is None else np.atleast_1d(elements)
    coords = mesh.tri_coords[elements]
    basis = TriBasis(mesh.centroids[elements], mesh.diameters[elements], k)
    pts, w = map_tri_rule(tri_quadrature(degree if degree is not None else 2 * k + 4), coords)
    phi, _, _ = eval_tri(basis, pts)
    M = mass_matrix(phi, w)
    check_mass(M)
    uq = np.broadcast_to(np.asarray(u(pts[..., 0], pts[..., 1]), dtype=float), w.shape)
    rhs = np.einsum("eq,eq,eqi->ei", w, uq, phi)
    return np.linalg.solve(M, rhs[..., None])[..., 0]


def edge_points(mesh: Mesh, k: int, edges, degree=None):
    """Gauss points (nE, nq, 2) on the given edges, reference weights and P_0..P_{k-1}."""
    rule = edge_quadrature(degree if degree is not None else 2 * k + 4)
    a = mesh.vertices[mesh.edges[edges, 0]]
    b = mesh.vertices[mesh.edges[edges, 1]]
    pts = 0.5 * (a + b)[:, None, :] + rule.points[:, None] * (0.5 * (b - a))[:, None, :]
    return pts, rule.weights, eval_edge(k - 1, rule.points)


def legendre_moments(values, weights, P) -> np.ndarray:
    """Q_b coefficients from point values on the reference Gauss rule."""
    jw = 0.5 * (2 * np.arange(P.shape[1]) + 1)
    return jw * np.einsum("q,eq,qj->ej", weights, values, P)


def project_edges(mesh: Mesh, k: int, u, grad_u, edges=None, degree=None):
    """Per edge: (Q_b u, Q_b(grad u . n_e)) as Legendre coefficients, each (nE, k)."""
    edges = np.arange(mesh.n_edges) if edges is None else np.atleast_1d(edges)
    pts, weights, P = edge_points(mesh, k, edges, degree)
    x, y = pts[..., 0], pts[..., 1]
    uq = np.broadcast_to(np.asarray(u(x, y), dtype=float), x.shape)
    gx, gy = grad_u(x, y)
    ne = mesh.edge_normals[edges]
    dn = gx * ne[:, None, 0] + gy * ne[:, None, 1]
    return legendre_moments(uq, weights, P), legendre_moments(dn, weights, P)


def project_Qh(mesh: Mesh, k: int, u, grad_u, t: int | None = None):
    """Q_h u = {Q_0 u, Q_b u, Q_b(grad u . n_e)}.

    With ``t`` given, returns the local DOF vector of element t; otherwise
    the triple (interior (nT, n0), vb (nE, k), vn (nE, k)).
    """
    if t is None:
        vb, vn = project_edges(mesh, k, u, grad_u)
        return project_interior(mesh, k, u), vb, vn
    layout = ElementDofLayout(k)
    v = np.zeros(layout.n_local)
    v[: layout.n0] = project_interior(mesh, k, u, [t])[0]
    vb, vn = project_edges(mesh, k, u, grad_u, mesh.tri_edges[t])
    for l in range(3):
        v[layout.vb(l)] = vb[l]
        v[layout.vn(l)] = vn[l]
    return v
