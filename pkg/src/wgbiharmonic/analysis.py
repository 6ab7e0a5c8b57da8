"""Manufactured solutions, error norms and convergence studies."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .element import ElementDofLayout, edge_points, legendre_moments, local_operators
from .mesh import Mesh, build_unit_square_mesh, lshape_level
from .polybasis import TriBasis, eval_tri, map_tri_rule, tri_quadrature
from .solver import BoundaryData, WGFunction, solve_wg

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ManufacturedSolution:
    name: str
    u: Callable
    grad: Callable  # (x, y) -> (ux, uy)
    lap: Callable
    f: Callable  # biharmonic of u
    regularity: str = "smooth"
    domain: str = "unit_square"

    @property
    def boundary(self) -> BoundaryData:
        return BoundaryData.from_solution(self.u, self.grad)

    def g_n(self, x, y, nx, ny):
        gx, gy = self.grad(x, y)
        return gx * nx + gy * ny


def _separable(name, p, q, regularity="smooth"):
    """u = p(x) q(y) with p, q given as (f, f', f'', f'''') tuples."""
    p0, p1, p2, p4 = p
    q0, q1, q2, q4 = q
    return ManufacturedSolution(
        name,
        u=lambda x, y: p0(x) * q0(y),
        grad=lambda x, y: (p1(x) * q0(y), p0(x) * q1(y)),
        lap=lambda x, y: p2(x) * q0(y) + p0(x) * q2(y),
        f=lambda x, y: p4(x) * q0(y) + 2 * p2(x) * q2(y) + p0(x) * q4(y),
        regularity=regularity,
    )


# x^2 (1-x)^2 and derivatives
_bump = (
    lambda s: s**2 * (1 - s) ** 2,
    lambda s: 2 * s - 6 * s**2 + 4 * s**3,
    lambda s: 2 - 12 * s + 12 * s**2,
    lambda s: 24.0 + 0 * s,
)
# y^2 (1 - y^2) = y^2 - y^4
_verbatim_y = (
    lambda s: s**2 - s**4,
    lambda s: 2 * s - 4 * s**3,
    lambda s: 2 - 12 * s**2,
    lambda s: -24.0 + 0 * s,
)
_sin = (
    lambda s: np.sin(np.pi * s),
    lambda s: np.pi * np.cos(np.pi * s),
    lambda s: -np.pi**2 * np.sin(np.pi * s),
    lambda s: np.pi**4 * np.sin(np.pi * s),
)


def example1() -> ManufacturedSolution:
    """Clamped bump x^2(1-x)^2 y^2(1-y)^2: u and du/dn vanish on the boundary."""
    return _separable("example1", _bump, _bump)


def example1_verbatim() -> ManufacturedSolution:
    """x^2(1-x)^2 y^2(1-y^2); its normal derivative is nonzero at y = 1."""
    return _separable("example1-verbatim", _bump, _verbatim_y)


def example2() -> ManufacturedSolution:
    return _separable("example2", _sin, _sin)


_ALPHA = 5.0 / 3.0


def _polar(x, y):
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    theta = np.where(theta < 0, theta + 2 * np.pi, theta)
    return r, theta


def _ex3_u(x, y):
    r, th = _polar(x, y)
    return r**_ALPHA * np.sin(_ALPHA * th)


def _ex3_grad(x, y):
    r, th = _polar(x, y)
    # u_r and u_theta / r share the factor alpha r^(alpha - 1); the limit at r = 0 is 0
    c = _ALPHA * r ** (_ALPHA - 1)
    ur = c * np.sin(_ALPHA * th)
    ut = c * np.cos(_ALPHA * th)
    cs, sn = np.cos(th), np.sin(th)
    return ur * cs - ut * sn, ur * sn + ut * cs


def example3() -> ManufacturedSolution:
    """r^(5/3) sin(5 theta/3) on the L-shape, harmonic hence biharmonic."""
    return ManufacturedSolution(
        "example3",
        u=_ex3_u,
        grad=_ex3_grad,
        lap=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        f=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        regularity="H^(8/3 - eps)",
        domain="lshape",
    )


EXAMPLES = {
    1: example1,
    2: example2,
    3: example3,
}


def get_example(example_id: int, verbatim: bool = False) -> ManufacturedSolution:
    if example_id == 1 and verbatim:
        return example1_verbatim()
    try:
        return EXAMPLES[int(example_id)]()
    except KeyError:
        raise ValueError(f"unknown example {example_id!r}; choose 1, 2 or 3") from None


# ------------------------------------------------------------------- norms
def triple_bar_norm(v: WGFunction, quad_degree: int | None = None, chunk: int = 4096) -> float:
    """Discrete H^2 norm, integrated term by term with quadrature.

    |||v|||^2 = sum_T ||Delta_w v||_T^2 + h_T^-1 ||(grad v_0 - v_n n_e) . n||_dT^2
                      + h_T^-3 ||Q_b v_0 - v_b||_dT^2
    """
    mesh = v.mesh
    vloc = v.local()
    total = 0.0
    for s in range(0, mesh.n_triangles, chunk):
        idx = np.arange(s, min(s + chunk, mesh.n_triangles))
        total += _triple_bar_sq(v, vloc[idx], idx, quad_degree).sum()
    return float(np.sqrt(total))


def _triple_bar_sq(v: WGFunction, vloc, idx, quad_degree):
    mesh, k = v.mesh, v.k
    m = ElementDofLayout(k).n_lap
    qd = quad_degree if quad_degree is not None else 2 * k + 2
    h = mesh.diameters[idx]
    basis = TriBasis(mesh.centroids[idx], h, k)
    v0c = v.interior[idx]

    ops = local_operators(mesh, k, idx)
    c = np.linalg.solve(ops.M, np.einsum("eij,ej->ei", ops.L, vloc)[..., None])[..., 0]
    pts, w = map_tri_rule(tri_quadrature(qd), mesh.tri_coords[idx])
    phi, _, _ = eval_tri(basis, pts)
    lap_w = np.einsum("eqi,ei->eq", phi[..., :m], c)
    total = np.einsum("eq,eq->e", w, lap_w**2)

    n_out = mesh.outward_normals[idx]
    for l in range(3):
        edges = mesh.tri_edges[idx, l]
        epts, ew, P = edge_points(mesh, k, edges, qd)
        ephi, egrad, _ = eval_tri(basis, epts)
        wq = 0.5 * mesh.edge_lengths[edges, None] * ew
        v0 = np.einsum("eqi,ei->eq", ephi, v0c)
        dv0 = np.einsum("eqix,ei,ex->eq", egrad, v0c, n_out[:, l])
        n_dot = np.einsum("ex,ex->e", mesh.edge_normals[edges], n_out[:, l])
        vn = np.einsum("qj,ej->eq", P, v.vn[edges]) * n_dot[:, None]
        vb = np.einsum("qj,ej->eq", P, v.vb[edges])
        qb_v0 = np.einsum("qj,ej->eq", P, legendre_moments(v0, ew, P))
        total += np.einsum("eq,eq->e", wq, (dv0 - vn) ** 2) / h
        total += np.einsum("eq,eq->e", wq, (qb_v0 - vb) ** 2) / h**3
    return total


def l2_norm(v: WGFunction, quad_degree: int | None = None) -> float:
    """Element-based L2 norm of the interior component v_0."""
    mesh, k = v.mesh, v.k
    pts, w = map_tri_rule(tri_quadrature(quad_degree or 2 * k + 2), mesh.tri_coords)
    phi, _, _ = eval_tri(TriBasis(mesh.centroids, mesh.diameters, k), pts)
    v0 = np.einsum("eqi,ei->eq", phi, v.interior)
    return float(np.sqrt(np.einsum("eq,eq->", w, v0**2)))


def triple_bar_error(uh: WGFunction, exact: ManufacturedSolution) -> float:
    """|||u_h - Q_h u|||."""
    return triple_bar_norm(uh - WGFunction.project(uh.mesh, uh.k, exact.u, exact.grad))


def l2_error(uh: WGFunction, exact: ManufacturedSolution) -> float:
    """||u_0 - Q_0 u||."""
    return l2_norm(uh - WGFunction.project(uh.mesh, uh.k, exact.u, exact.grad))


# ----------------------------------------------------------- convergence
def rate(e_coarse: float, e_fine: float) -> float:
    """Observed order for a halved mesh size."""
    if not (e_coarse > 0 and e_fine > 0):
        raise ValueError(f"errors must be positive, got {e_coarse}, {e_fine}")
    return math.log2(e_coarse / e_fine)


@dataclass
class ConvergenceRow:
    level: int
    h: float
    err_H2: float
    err_L2: float
    rate_H2: float | None = None
    rate_L2: float | None = None


@dataclass
class ConvergenceTable:
    example: str
    k: int
    rows: list[ConvergenceRow] = field(default_factory=list)
    failure: str | None = None

    COLUMNS = ("level", "h", "err_H2", "rate_H2", "err_L2", "rate_L2")

    def add(self, level, h, err_H2, err_L2):
        row = ConvergenceRow(level, h, err_H2, err_L2)
        if self.rows:
            prev = self.rows[-1]
            row.rate_H2 = rate(prev.err_H2, err_H2)
            row.rate_L2 = rate(prev.err_L2, err_L2)
        self.rows.append(row)
        return row

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.COLUMNS)
        for r in self.rows:
            wr.writerow([r.level, repr(r.h), repr(r.err_H2), _opt(r.rate_H2), repr(r.err_L2), _opt(r.rate_L2)])
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = [
            f"{self.example}, k={self.k}",
            "",
            "| h | \\|\\|\\|u_h - Q_h u\\|\\|\\| | order | \\|u_0 - Q_0 u\\| | order |",
            "|---|---|---|---|---|",
        ]
        for r in self.rows:
            hs = f"1/{round(1 / r.h)}" if r.h > 0 and abs(1 / r.h - round(1 / r.h)) < 1e-9 else f"{r.h:.4g}"
            lines.append(
                f"| {hs} | {r.err_H2:.4e} | {_fmt_rate(r.rate_H2)} | {r.err_L2:.4e} | {_fmt_rate(r.rate_L2)} |"
            )
        if self.failure:
            lines += ["", f"stopped: {self.failure}"]
        return "\n".join(lines) + "\n"


def _opt(x):
    return "" if x is None else repr(x)


def _fmt_rate(x):
    return "" if x is None else f"{x:.4f}"


LSHAPE_START = 2


def example_mesh(example_id: int, level: int, start_n: int = 4, lshape_start: int = LSHAPE_START) -> tuple[Mesh, float]:
    """Mesh for refinement level >= 1 and its nominal size h.

    Unit square levels start at n = start_n. L-shape level 1 is the
    six-triangle mesh refined ``lshape_start`` times (h = 1/4 by default).
    """
    if level < 1:
        raise ValueError("levels start at 1")
    if int(example_id) == 3:
        depth = lshape_start + level
        return lshape_level(depth), 2.0 ** (1 - depth)
    n = start_n * 2 ** (level - 1)
    return build_unit_square_mesh(n), 1.0 / n


def run_convergence(
    example_id: int,
    k: int,
    levels: int,
    verbatim: bool = False,
    algorithm: str = "schur",
    method: str = "direct",
    start_n: int = 4,
    lshape_start: int = LSHAPE_START,
) -> ConvergenceTable:
    if levels < 1:
        raise ValueError("levels must be >= 1")
    ex = get_example(example_id, verbatim)
    table = ConvergenceTable(ex.name, k)
    for level in range(1, levels + 1):
        mesh, h = example_mesh(example_id, level, start_n, lshape_start)
        try:
            uh, report = solve_wg(mesh, k, ex.f, ex.boundary, algorithm=algorithm, method=method)
        except Exception as exc:  # noqa: BLE001 - keep the partial table
            table.failure = f"level {level}: {exc}"
            log.error("convergence stopped at level %d: %s", level, exc)
            break
        row = table.add(level, h, triple_bar_error(uh, ex), l2_error(uh, ex))
        log.info("level %d h=%.4g H2=%.4e L2=%.4e (%s)", level, h, row.err_H2, row.err_L2, report)
    return table
