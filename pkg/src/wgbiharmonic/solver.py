"""Global assembly, static condensation and linear solves.

Two routes to the same discrete solution:

* :func:`assemble_full` builds the complete WG system in all unknowns.
* :func:`condense` eliminates the element interiors ``u_0`` locally and
  leaves a symmetric positive definite system in the edge unknowns
  ``(u_b, u_n)`` only; :func:`recover_interior` back-substitutes.

Boundary traces are fixed (``u_b = Q_b g``, ``u_n = sigma Q_b g_n``) and
moved to the right-hand side, which keeps the reduced matrices SPD.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from cholespy import CholeskySolverD, MatrixType

from .element import ElementDofLayout, edge_points, legendre_moments, local_operators, project_edges, project_interior
from .errors import ConvergenceError, DegenerateElementError, NotPositiveDefiniteError
from .mesh import Mesh

log = logging.getLogger(__name__)

CHUNK = 4096


@dataclass(frozen=True)
class BoundaryData:
    """Clamped boundary data: ``g(x, y)`` and ``g_n(x, y, nx, ny)``.

    ``g_n`` is the derivative along the outward normal (nx, ny) of the
    domain, which is passed in so that corner-adjacent edges are unambiguous.
    """

    g: Callable
    g_n: Callable

    @classmethod
    def homogeneous(cls) -> "BoundaryData":
        return cls(lambda x, y: np.zeros_like(x), lambda x, y, nx, ny: np.zeros_like(x))

    @classmethod
    def from_solution(cls, u, grad_u) -> "BoundaryData":
        def g_n(x, y, nx, ny):
            gx, gy = grad_u(x, y)
            return gx * nx + gy * ny

        return cls(u, g_n)


class DofMap:
    """Global numbering: all element interiors first, then per-edge (v_b, v_n) blocks."""

    def __init__(self, mesh: Mesh, k: int):
        self.mesh = mesh
        self.layout = ElementDofLayout(k)
        lay = self.layout
        self.k = k
        self.n_interior = mesh.n_triangles * lay.n0
        self.n_edge_dofs = mesh.n_edges * 2 * k
        self.n_total = self.n_interior + self.n_edge_dofs

        interior = np.arange(self.n_interior).reshape(mesh.n_triangles, lay.n0)
        edge_blocks = self.n_interior + mesh.tri_edges[:, :, None] * 2 * k + np.arange(2 * k)
        self.element_dofs = np.concatenate([interior, edge_blocks.reshape(mesh.n_triangles, 6 * k)], axis=1)

        bmask = np.repeat(mesh.boundary_edges, 2 * k)
        self.fixed_mask = np.concatenate([np.zeros(self.n_interior, dtype=bool), bmask])
        self.n_edge_fixed = int(bmask.sum())
        self.n_edge_free = self.n_edge_dofs - self.n_edge_fixed

    def edge_dofs(self, e: int) -> np.ndarray:
        return self.n_interior + e * 2 * self.k + np.arange(2 * self.k)

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.fixed_mask)

    @property
    def fixed(self) -> np.ndarray:
        return np.flatnonzero(self.fixed_mask)

    @property
    def n_free(self) -> int:
        return self.n_total - int(self.fixed_mask.sum())


@dataclass
class WGFunction:
    """Coefficients of a weak function {v_0, v_b, v_n}; v_n is taken along n_e."""

    mesh: Mesh
    k: int
    interior: np.ndarray  # (nT, n0)
    vb: np.ndarray  # (nE, k)
    vn: np.ndarray  # (nE, k)

    @classmethod
    def zeros(cls, mesh: Mesh, k: int) -> "WGFunction":
        lay = ElementDofLayout(k)
        return cls(mesh, k, np.zeros((mesh.n_triangles, lay.n0)), np.zeros((mesh.n_edges, k)), np.zeros((mesh.n_edges, k)))

    @classmethod
    def from_vector(cls, mesh: Mesh, k: int, x) -> "WGFunction":
        dm = DofMap(mesh, k)
        x = np.asarray(x, dtype=float)
        if x.shape != (dm.n_total,):
            raise ValueError(f"expected {dm.n_total} coefficients, got {x.shape}")
        interior = x[: dm.n_interior].reshape(mesh.n_triangles, -1).copy()
        edges = x[dm.n_interior :].reshape(mesh.n_edges, 2, k)
        return cls(mesh, k, interior, edges[:, 0].copy(), edges[:, 1].copy())

    @classmethod
    def project(cls, mesh: Mesh, k: int, u, grad_u) -> "WGFunction":
        vb, vn = project_edges(mesh, k, u, grad_u)
        return cls(mesh, k, project_interior(mesh, k, u), vb, vn)

    def to_vector(self) -> np.ndarray:
        edges = np.stack([self.vb, self.vn], axis=1).reshape(-1)
        return np.concatenate([self.interior.reshape(-1), edges])

    def local(self, elements=None) -> np.ndarray:
        """Local DOF vectors (ne, n_local) in the element ordering."""
        dm = DofMap(self.mesh, self.k)
        rows = dm.element_dofs if elements is None else dm.element_dofs[np.atleast_1d(elements)]
        return self.to_vector()[rows]

    def __sub__(self, other: "WGFunction") -> "WGFunction":
        return WGFunction(self.mesh, self.k, self.interior - other.interior, self.vb - other.vb, self.vn - other.vn)

    def __add__(self, other: "WGFunction") -> "WGFunction":
        return WGFunction(self.mesh, self.k, self.interior + other.interior, self.vb + other.vb, self.vn + other.vn)

    def __mul__(self, c: float) -> "WGFunction":
        return WGFunction(self.mesh, self.k, c * self.interior, c * self.vb, c * self.vn)

    __rmul__ = __mul__

    def dump(self, path) -> None:
        """Text dump keyed by DofMap section."""
        lines = [f"wgfunction k={self.k} triangles={len(self.interior)} edges={len(self.vb)}"]
        for name, arr in (("interior", self.interior), ("vb", self.vb), ("vn", self.vn)):
            lines.append(f"[{name}] {arr.shape[0]} {arr.shape[1]}")
            lines += [" ".join(repr(float(v)) for v in row) for row in arr]
        Path(path).write_text("\n".join(lines) + "\n")


def boundary_values(mesh: Mesh, k: int, bc: BoundaryData, degree=None):
    """Fixed (v_b, v_n) Legendre coefficients on the boundary edges.

    v_b = Q_b g and v_n = sigma Q_b g_n with sigma = n_Omega . n_e.
    """
    be = np.flatnonzero(mesh.boundary_edges)
    t = mesh.edge_tris[be, 0]
    slot = np.argmax(mesh.tri_edges[t] == be[:, None], axis=1)
    sigma = mesh.tri_signs[t, slot].astype(float)
    n_out = sigma[:, None] * mesh.edge_normals[be]

    pts, weights, P = edge_points(mesh, k, be, degree)
    x, y = pts[..., 0], pts[..., 1]
    nx = np.broadcast_to(n_out[:, None, 0], x.shape)
    ny = np.broadcast_to(n_out[:, None, 1], x.shape)
    gq = np.broadcast_to(np.asarray(bc.g(x, y), dtype=float), x.shape)
    gnq = np.broadcast_to(np.asarray(bc.g_n(x, y, nx, ny), dtype=float), x.shape)
    vb = legendre_moments(gq, weights, P)
    vn = sigma[:, None] * legendre_moments(gnq, weights, P)
    return be, vb, vn


def _fixed_vector(dm: DofMap, bc: BoundaryData | None, degree=None) -> np.ndarray:
    x = np.zeros(dm.n_total)
    if bc is None:
        return x
    be, vb, vn = boundary_values(dm.mesh, dm.k, bc, degree)
    base = dm.n_interior + be[:, None] * 2 * dm.k
    x[base + np.arange(dm.k)] = vb
    x[base + dm.k + np.arange(dm.k)] = vn
    return x


def _chunks(n):
    for s in range(0, n, CHUNK):
        yield np.arange(s, min(s + CHUNK, n))


def _zero_f(x, y):
    return np.zeros_like(x)


@dataclass
class GlobalSystem:
    """Full WG system restricted to free DOFs, Dirichlet values folded into rhs."""

    dofmap: DofMap
    matrix: sp.csr_matrix
    rhs: np.ndarray
    fixed_values: np.ndarray  # full-length vector, nonzero only on fixed DOFs
    full_matrix: sp.csr_matrix = field(repr=False, default=None)
    full_load: np.ndarray = field(repr=False, default=None)

    def expand(self, x_free) -> np.ndarray:
        x = self.fixed_values.copy()
        x[self.dofmap.free] = x_free
        return x


def assemble_full(mesh: Mesh, k: int, f=None, bc: BoundaryData | None = None, load_degree=None) -> GlobalSystem:
    dm = DofMap(mesh, k)
    f = f or _zero_f
    rows, cols, vals = [], [], []
    load = np.zeros(dm.n_total)
    for idx in _chunks(mesh.n_triangles):
        ops = local_operators(mesh, k, idx, f=f, load_degree=load_degree)
        _check_interior_blocks(ops.A[:, : dm.layout.n0, : dm.layout.n0], idx[0])
        gd = dm.element_dofs[idx]
        rows.append(np.repeat(gd, gd.shape[1], axis=1).ravel())
        cols.append(np.tile(gd, (1, gd.shape[1])).ravel())
        vals.append(ops.A.ravel())
        np.add.at(load, gd.ravel(), ops.F.ravel())
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dm.n_total, dm.n_total)
    ).tocsr()
    xf = _fixed_vector(dm, bc)
    free = dm.free
    Kff = K[free][:, free].tocsr()
    rhs = load[free] - K[free] @ xf
    return GlobalSystem(dm, Kff, rhs, xf, K, load)


def _check_interior_blocks(A00, offset):
    try:
        np.linalg.cholesky(A00)
    except np.linalg.LinAlgError:
        for i, blk in enumerate(A00):
            try:
                np.linalg.cholesky(blk)
            except np.linalg.LinAlgError:
                el = offset + i
                raise DegenerateElementError(f"element {el}: interior block is not positive definite", el) from None
        raise


def _cho_solve(C, B):
    """Solve (C C^T) X = B for stacks of lower Cholesky factors."""
    Y = np.linalg.solve(C, B)
    return np.linalg.solve(np.swapaxes(C, -1, -2), Y)


@dataclass
class CondensedSystem:
    """Schur complement system in the free edge unknowns plus recovery data."""

    dofmap: DofMap
    chol00: np.ndarray  # (nT, n0, n0) lower Cholesky factors of A_00
    A0e: np.ndarray  # (nT, n0, 6k)
    F0: np.ndarray  # (nT, n0)
    element_matrices: np.ndarray  # (nT, 6k, 6k) A_ee - A_e0 A_00^-1 A_0e
    element_loads: np.ndarray  # (nT, 6k) -A_e0 A_00^-1 F_0
    matrix: sp.csr_matrix
    rhs: np.ndarray
    edge_fixed_values: np.ndarray  # over all edge DOFs
    edge_free: np.ndarray  # indices into edge DOFs

    def expand(self, x_free) -> np.ndarray:
        x = self.edge_fixed_values.copy()
        x[self.edge_free] = x_free
        return x


def condense(mesh: Mesh, k: int, f=None, bc: BoundaryData | None = None, load_degree=None) -> CondensedSystem:
    dm = DofMap(mesh, k)
    n0 = dm.layout.n0
    f = f or _zero_f
    nT = mesh.n_triangles
    chol = np.empty((nT, n0, n0))
    A0e = np.empty((nT, n0, 6 * k))
    F0 = np.empty((nT, n0))
    Sc = np.empty((nT, 6 * k, 6 * k))
    Gc = np.empty((nT, 6 * k))
    for idx in _chunks(nT):
        ops = local_operators(mesh, k, idx, f=f, load_degree=load_degree)
        A = ops.A
        A00 = A[:, :n0, :n0]
        _check_interior_blocks(A00, idx[0])
        C = np.linalg.cholesky(A00)
        B = A[:, :n0, n0:]
        X = _cho_solve(C, B)
        schur = A[:, n0:, n0:] - np.einsum("eji,ejk->eik", B, X)
        Sc[idx] = 0.5 * (schur + np.swapaxes(schur, 1, 2))
        f0 = ops.F[:, :n0]
        Gc[idx] = -np.einsum("eji,ej->ei", B, _cho_solve(C, f0[..., None])[..., 0])
        chol[idx], A0e[idx], F0[idx] = C, B, f0

    edofs = dm.element_dofs[:, n0:] - dm.n_interior
    m = 6 * k
    K = sp.coo_matrix(
        (Sc.ravel(), (np.repeat(edofs, m, axis=1).ravel(), np.tile(edofs, (1, m)).ravel())),
        shape=(dm.n_edge_dofs, dm.n_edge_dofs),
    ).tocsr()
    load = np.zeros(dm.n_edge_dofs)
    np.add.at(load, edofs.ravel(), Gc.ravel())

    xe = _fixed_vector(dm, bc)[dm.n_interior :]
    free = np.flatnonzero(~dm.fixed_mask[dm.n_interior :])
    Kff = K[free][:, free].tocsr()
    rhs = load[free] - K[free] @ xe
    return CondensedSystem(dm, chol, A0e, F0, Sc, Gc, Kff, rhs, xe, free)


def recover_interior(cs: CondensedSystem, edge_solution) -> WGFunction:
    """Back-substitute w_0 = A_00^{-1}(F_0 - A_0e w_e) element by element.

    ``edge_solution`` is either the free edge unknowns or the full edge vector.
    """
    dm = cs.dofmap
    x_e = np.asarray(edge_solution, dtype=float)
    if x_e.shape[0] == len(cs.edge_free) and len(cs.edge_free) != dm.n_edge_dofs:
        x_e = cs.expand(x_e)
    we = x_e[dm.element_dofs[:, dm.layout.n0 :] - dm.n_interior]
    r = cs.F0 - np.einsum("eij,ej->ei", cs.A0e, we)
    w0 = _cho_solve(cs.chol00, r[..., None])[..., 0]
    return WGFunction.from_vector(dm.mesh, dm.k, np.concatenate([w0.ravel(), x_e]))


# ------------------------------------------------------------------- solving
@dataclass
class SolveReport:
    method: str
    n: int
    nnz: int
    residual: float
    iterations: int = 0
    seconds: float = 0.0

    def __str__(self):
        return (
            f"method={self.method} n={self.n} nnz={self.nnz} "
            f"rel_residual={self.residual:.3e} iterations={self.iterations} time={self.seconds:.3f}s"
        )


def _rel_residual(A, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return r / nb if nb > 0 else r


def solve(system, rhs=None, method: str = "direct", tol: float = 1e-10, refine_steps: int = 2):
    """Solve an SPD system; returns (x, SolveReport).

    ``system`` is a GlobalSystem/CondensedSystem or a sparse/dense matrix
    together with ``rhs``. ``direct`` is sparse Cholesky (CHOLMOD with its
    fill-reducing ordering) plus a couple of iterative refinement sweeps;
    ``iterative`` is Jacobi-preconditioned CG capped at 50 sqrt(n) iterations.
    """
    if rhs is None:
        A, b = system.matrix, system.rhs
    else:
        A, b = system, rhs
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    t0 = time.perf_counter()
    if n == 0:
        return np.zeros(0), SolveReport(method, 0, 0, 0.0)

    if method == "direct":
        coo = A.tocoo()
        try:
            fac = CholeskySolverD(
                n, coo.row.astype(np.int32), coo.col.astype(np.int32), coo.data.astype(np.float64), MatrixType.COO
            )
        except ValueError as exc:
            raise NotPositiveDefiniteError(f"Cholesky factorization failed: {exc}") from exc
        x = np.zeros(n)
        fac.solve(b, x)
        for _ in range(refine_steps):
            r = b - A @ x
            dx = np.zeros(n)
            fac.solve(r, dx)
            x += dx
        if not np.all(np.isfinite(x)):
            raise NotPositiveDefiniteError("Cholesky produced non-finite values")
        report = SolveReport("direct", n, A.nnz, _rel_residual(A, x, b), refine_steps)
    elif method == "iterative":
        d = A.diagonal()
        if np.any(d <= 0):
            raise NotPositiveDefiniteError("non-positive diagonal entry; matrix is not SPD")
        Minv = spla.LinearOperator((n, n), matvec=lambda v: v / d, dtype=float)
        maxiter = int(np.ceil(50 * np.sqrt(n)))
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=Minv, callback=cb)
        res = _rel_residual(A, x, b)
        if info != 0 or res > tol * 10:
            raise ConvergenceError(f"CG did not converge in {maxiter} iterations (relative residual {res:.3e})")
        report = SolveReport("iterative", n, A.nnz, res, count[0])
    else:
        raise ValueError(f"unknown solver method {method!r}")
    report.seconds = time.perf_counter() - t0
    log.debug("solve: %s", report)
    return x, report


def solve_wg(mesh: Mesh, k: int, f=None, bc: BoundaryData | None = None, algorithm: str = "schur", method: str = "direct", tol: float = 1e-10):
    """Run the full or condensed algorithm end to end; returns (WGFunction, SolveReport)."""
    if algorithm == "full":
        gs = assemble_full(mesh, k, f, bc)
        x, rep = solve(gs, method=method, tol=tol)
        return WGFunction.from_vector(mesh, k, gs.expand(x)), rep
    if algorithm == "schur":
        cs = condense(mesh, k, f, bc)
        x, rep = solve(cs, method=method, tol=tol)
        return recover_interior(cs, cs.expand(x)), rep
    raise ValueError(f"unknown algorithm {algorithm!r}")


def check_equivalence(mesh: Mesh, k: int, f=None, bc: BoundaryData | None = None) -> float:
    """Max-abs DOF difference between the full and condensed solutions."""
    u, _ = solve_wg(mesh, k, f, bc, algorithm="full")
    w, _ = solve_wg(mesh, k, f, bc, algorithm="schur")
    return float(np.max(np.abs(u.to_vector() - w.to_vector())))


def residual_check(gs: GlobalSystem, u: WGFunction) -> float:
    """max |a(u_h, v) - (f, v_0)| over the free basis vectors, relative to ||F||."""
    r = gs.full_matrix @ u.to_vector() - gs.full_load
    nf = np.linalg.norm(gs.full_load)
    return float(np.max(np.abs(r[gs.dofmap.free])) / (nf if nf > 0 else 1.0))


def write_matrix_market(system, path, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(system.matrix), comment=comment, symmetry="symmetric")
