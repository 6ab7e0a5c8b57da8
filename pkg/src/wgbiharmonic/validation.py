"""Self-checks of the discretization's structural invariants.

Each check returns a :class:`CheckResult`; :func:`run_all` runs them in a
fixed order. Randomness only chooses sample points and coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .element import ElementDofLayout, local_operators, project_Qh, weak_laplacian
from .mesh import Mesh, build_lshape_initial, build_unit_square_mesh, refine_uniform, validate
from .polybasis import TriBasis, eval_edge, eval_tri, map_tri_rule, project_edge, project_tri, tri_quadrature
from .solver import BoundaryData, WGFunction, assemble_full, check_equivalence, condense, solve, solve_wg


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def random_poly(rng, degree: int):
    """Random polynomial of total degree <= degree, with its gradient and Laplacian."""
    ex = [(d - b, b) for d in range(degree + 1) for b in range(d + 1)]
    c = rng.standard_normal(len(ex))

    def u(x, y):
        return sum(ci * x**a * y**b for ci, (a, b) in zip(c, ex))

    def grad(x, y):
        gx = sum(ci * a * x ** max(a - 1, 0) * y**b for ci, (a, b) in zip(c, ex) if a)
        gy = sum(ci * b * x**a * y ** max(b - 1, 0) for ci, (a, b) in zip(c, ex) if b)
        return gx + 0 * x, gy + 0 * x

    def lap(x, y):
        out = 0 * x
        for ci, (a, b) in zip(c, ex):
            if a >= 2:
                out = out + ci * a * (a - 1) * x ** (a - 2) * y**b
            if b >= 2:
                out = out + ci * b * (b - 1) * x**a * y ** (b - 2)
        return out

    return u, grad, lap


def random_triangle_mesh(rng, n: int, min_quality: float = 0.15) -> Mesh:
    """n disjoint random CCW triangles (each its own one-element mesh component).

    Triangles are shape regular: area >= min_quality * diameter^2
    (0.433 for equilateral, 0.25 for the right isosceles triangle).
    """
    verts, tris = [], []
    for i in range(n):
        while True:
            p = rng.uniform(-1, 1, size=(3, 2)) * rng.uniform(0.05, 1.0) + rng.uniform(-2, 2, size=2)
            d1, d2 = p[1] - p[0], p[2] - p[0]
            area = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
            edges = np.linalg.norm(p - np.roll(p, -1, axis=0), axis=1)
            if abs(area) >= min_quality * edges.max() ** 2:
                break
        if area < 0:
            p = p[[0, 2, 1]]
        verts.append(p)
        tris.append([3 * i, 3 * i + 1, 3 * i + 2])
    return Mesh.from_arrays(np.vstack(verts), np.array(tris))


def local_vectors(mesh: Mesh, k: int, v0, vb, vn) -> np.ndarray:
    lay = ElementDofLayout(k)
    out = np.zeros((mesh.n_triangles, lay.n_local))
    out[:, : lay.n0] = v0
    for l in range(3):
        out[:, lay.vb(l)] = vb[mesh.tri_edges[:, l]]
        out[:, lay.vn(l)] = vn[mesh.tri_edges[:, l]]
    return out


# ------------------------------------------------------------------- checks
def check_mesh(mesh: Mesh) -> CheckResult:
    report = validate(mesh)
    return CheckResult("mesh invariants", not report, "; ".join(report[:5]) or f"{mesh.n_triangles} triangles ok")


def check_commuting(rng, k: int, n_elements: int = 100, tol: float = 1e-11) -> CheckResult:
    """Delta_w Q_h u = Q_{k-2} Delta u, compared pointwise on random elements."""
    mesh = random_triangle_mesh(rng, n_elements)
    coords = mesh.tri_coords
    pts, _ = map_tri_rule(tri_quadrature(2 * k), coords)
    vals, _, _ = eval_tri(TriBasis.on(coords, k - 2), pts)
    worst = 0.0
    for _ in range(3):
        u, grad, lap = random_poly(rng, k)
        v0, vb, vn = project_Qh(mesh, k, u, grad)
        dw = weak_laplacian(mesh, k, local_vectors(mesh, k, v0, vb, vn))
        ql = project_tri(lap, k - 2, coords)
        diff = np.einsum("eqi,ei->eq", vals, dw - ql)
        scale = max(1.0, float(np.abs(np.einsum("eqi,ei->eq", vals, ql)).max()))
        worst = max(worst, float(np.abs(diff).max()) / scale)
    return CheckResult("commuting identity", worst <= tol, f"max rel diff {worst:.2e} (tol {tol:g})")


def check_projection_idempotence(rng, k: int, tol: float = 1e-12) -> CheckResult:
    mesh = random_triangle_mesh(rng, 10)
    coords = mesh.tri_coords

    def f(x, y):
        return np.sin(3 * x) * np.exp(y) + x * y

    c1 = project_tri(f, k, coords)
    basis = TriBasis.on(coords, k)

    def p1(x, y):
        vals, _, _ = eval_tri(basis, np.stack([x, y], axis=-1))
        return np.einsum("...qi,...i->...q", vals, c1)

    c2 = project_tri(p1, k, coords)
    pts = np.stack([coords.mean(axis=1), *(0.5 * (coords + coords.mean(axis=1, keepdims=True))).swapaxes(0, 1)], axis=1)
    vals, _, _ = eval_tri(basis, pts)
    tri_err = float(np.abs(np.einsum("eqi,ei->eq", vals, c1 - c2)).max())
    a, b = mesh.vertices[mesh.edges[:, 0]], mesh.vertices[mesh.edges[:, 1]]
    e1 = project_edge(f, k - 1, a, b)
    mid, d = 0.5 * (a + b), b - a
    L2 = (d**2).sum(axis=1)

    def q1(x, y):
        t = 2 * ((x - mid[:, None, 0]) * d[:, None, 0] + (y - mid[:, None, 1]) * d[:, None, 1]) / L2[:, None]
        return np.einsum("ej,eqj->eq", e1, eval_edge(k - 1, t))

    e2 = project_edge(q1, k - 1, a, b)
    # Legendre coefficients bound the sup norm of the difference on the edge
    err = max(tri_err, float(np.abs(e1 - e2).sum(axis=1).max()))
    return CheckResult("projection idempotence", err <= tol, f"max diff {err:.2e}")


def check_stabilizer(rng, k: int, tol: float = 1e-12) -> CheckResult:
    mesh = refine_uniform(build_lshape_initial())
    ops = local_operators(mesh, k)
    S = ops.S
    sym = float(np.abs(S - np.swapaxes(S, 1, 2)).max() / np.abs(S).max())
    eig = float((np.linalg.eigvalsh(S).min(axis=1) / np.abs(S).max(axis=(1, 2))).min())
    u, grad, _ = random_poly(rng, k)
    v = local_vectors(mesh, k, *project_Qh(mesh, k, u, grad))
    vsv = np.einsum("ei,eij,ej->e", v, S, v)
    scale = np.einsum("ei,ei->e", v, v) * np.abs(S).max(axis=(1, 2))
    kill = float((np.abs(vsv) / scale).max())
    ok = sym <= tol and eig >= -1e-12 and kill <= tol
    return CheckResult("stabilizer PSD and vanishing on Q_h P_k", ok, f"asym {sym:.1e}, min eig {eig:.1e}, |v'Sv| {kill:.1e}")


def check_sign_cancellation(mesh: Mesh, k: int = 2) -> CheckResult:
    """<v_n sigma, 1> from the two sides of each interior edge must cancel."""
    lay = ElementDofLayout(k)
    ops = local_operators(mesh, k)
    acc = np.zeros(mesh.n_edges)
    for l in range(3):
        # moment of v_n's constant Legendre mode against the constant test function
        np.add.at(acc, mesh.tri_edges[:, l], ops.L[:, 0, lay.vn(l).start])
    interior = mesh.edge_ntris == 2
    bad = np.flatnonzero(interior & (np.abs(acc) > 1e-12 * mesh.edge_lengths))
    detail = f"{len(bad)} interior edges fail" + (f" (first: edge {bad[0]})" if len(bad) else "")
    return CheckResult("interior-edge sign cancellation", not len(bad), detail)


def check_patch_test(k: int, tol: float = 1e-9) -> CheckResult:
    mesh = build_unit_square_mesh(3)

    def u(x, y):
        return x**2 + y**2

    def grad(x, y):
        return 2 * x, 2 * y

    bc = BoundaryData.from_solution(u, grad)
    uh, _ = solve_wg(mesh, k, None, bc)
    ref = WGFunction.project(mesh, k, u, grad)
    err = float(np.abs(uh.to_vector() - ref.to_vector()).max())
    return CheckResult("quadratic patch test", err <= tol, f"max DOF diff {err:.2e}")


def check_spd(k: int) -> CheckResult:
    mesh = build_unit_square_mesh(4)
    cs = condense(mesh, k, lambda x, y: np.ones_like(x), BoundaryData.homogeneous())
    K = cs.matrix.toarray()
    sym = float(np.abs(K - K.T).max() / np.abs(K).max())
    lam = float(np.linalg.eigvalsh(0.5 * (K + K.T)).min())
    try:
        solve(cs)
        chol = True
    except Exception:  # noqa: BLE001
        chol = False
    return CheckResult("condensed system SPD", chol and lam > 0 and sym <= 1e-12, f"min eig {lam:.3e}, asym {sym:.1e}")


def check_schur(k: int, tol: float = 1e-8) -> CheckResult:
    mesh = build_unit_square_mesh(4)

    def u(x, y):
        return np.sin(np.pi * x) * np.sin(np.pi * y)

    def grad(x, y):
        return np.pi * np.cos(np.pi * x) * np.sin(np.pi * y), np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)

    def f(x, y):
        return 4 * np.pi**4 * u(x, y)

    diff = check_equivalence(mesh, k, f, BoundaryData.from_solution(u, grad))
    return CheckResult("Schur complement equivalence", diff <= tol, f"max DOF diff {diff:.2e}")


def check_norm_identity(rng, k: int, tol: float = 1e-10) -> CheckResult:
    from .analysis import triple_bar_norm

    mesh = build_unit_square_mesh(3)
    gs = assemble_full(mesh, k)
    x = rng.standard_normal(gs.dofmap.n_total)
    v = WGFunction.from_vector(mesh, k, x)
    a = float(np.sqrt(x @ (gs.full_matrix @ x)))
    t = triple_bar_norm(v)
    rel = abs(a - t) / a
    return CheckResult("|||v|||^2 = a(v, v)", rel <= tol, f"rel diff {rel:.2e}")


def run_all(seed: int = 0, k: int = 2, mesh: Mesh | None = None) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    fixture = mesh if mesh is not None else build_unit_square_mesh(4)
    results = [check_mesh(fixture), check_sign_cancellation(fixture, k)]
    checks = [
        lambda: check_projection_idempotence(rng, k),
        lambda: check_commuting(rng, k),
        lambda: check_stabilizer(rng, k),
        lambda: check_patch_test(k),
        lambda: check_spd(k),
        lambda: check_schur(k),
        lambda: check_norm_identity(rng, k),
    ]
    for c in checks:
        try:
            results.append(c())
        except Exception as exc:  # noqa: BLE001 - report, keep going
            results.append(CheckResult(getattr(c, "__name__", "check"), False, f"error: {exc}"))
    return results
