"""Triangular meshes with globally oriented edges.

Every edge carries one fixed unit normal ``n_e``: the tangent from the
lower to the higher global vertex index, rotated by -90 degrees. The
trace unknowns ``v_b`` and ``v_n`` live on edges and are single valued
because of this convention; each triangle sees the edge through the sign
``sigma = n_T . n_e`` of its outward normal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# local edge l joins local vertices (l, l+1 mod 3)
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])


@dataclass(frozen=True)
class Edge:
    vertex_ids: tuple[int, int]
    normal: np.ndarray
    length: float
    is_boundary: bool
    adjacent_tris: tuple[int, ...]


@dataclass(frozen=True)
class ElementGeometry:
    coords: np.ndarray
    area: float
    centroid: np.ndarray
    diameter: float


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh.

    Build through :meth:`from_arrays` (or the constructors below), which
    derives all edge data from ``vertices`` and ``triangles``.
    """

    vertices: np.ndarray  # (nV, 2)
    triangles: np.ndarray  # (nT, 3)
    edges: np.ndarray  # (nE, 2), sorted vertex pairs
    tri_edges: np.ndarray  # (nT, 3), edge of local edge l
    tri_signs: np.ndarray  # (nT, 3), n_T . n_e in {+1, -1}
    edge_tris: np.ndarray  # (nE, 2), -1 where absent
    edge_ntris: np.ndarray  # (nE,), raw adjacency count (may exceed 2 on broken input)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_arrays(cls, vertices, triangles) -> "Mesh":
        vertices = np.ascontiguousarray(vertices, dtype=float).reshape(-1, 2)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
        nT = len(triangles)
        local = triangles[:, LOCAL_EDGES]  # (nT, 3, 2)
        pairs = np.sort(local, axis=2).reshape(-1, 2)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.reshape(nT, 3)
        signs = np.where(local[:, :, 0] < local[:, :, 1], 1, -1)

        ntris = np.bincount(inverse.ravel(), minlength=len(edges))
        edge_tris = -np.ones((len(edges), 2), dtype=np.int64)
        for t in range(nT):
            for e in inverse[t]:
                slot = 0 if edge_tris[e, 0] < 0 else 1
                if edge_tris[e, slot] < 0:
                    edge_tris[e, slot] = t
        return cls(vertices, triangles, edges, inverse, signs, edge_tris, ntris)

    # -- sizes -----------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    # -- edge geometry ---------------------------------------------------
    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def edge_tangents(self) -> np.ndarray:
        return self._cached(
            "tangents",
            lambda: self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]],
        )

    @property
    def edge_lengths(self) -> np.ndarray:
        return self._cached("lengths", lambda: np.hypot(*self.edge_tangents.T))

    @property
    def edge_normals(self) -> np.ndarray:
        def normals():
            t = self.edge_tangents
            return np.column_stack([t[:, 1], -t[:, 0]]) / self.edge_lengths[:, None]

        return self._cached("normals", normals)

    @property
    def boundary_edges(self) -> np.ndarray:
        """Boolean mask of edges with exactly one adjacent triangle."""
        return self.edge_ntris == 1

    @property
    def boundary_vertices(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.edges[self.boundary_edges].ravel()] = True
        return mask

    def edge(self, i: int) -> Edge:
        adj = tuple(int(t) for t in self.edge_tris[i] if t >= 0)
        return Edge(
            vertex_ids=(int(self.edges[i, 0]), int(self.edges[i, 1])),
            normal=self.edge_normals[i].copy(),
            length=float(self.edge_lengths[i]),
            is_boundary=bool(self.boundary_edges[i]),
            adjacent_tris=adj,
        )

    # -- element geometry -------------------------------------------------
    @property
    def tri_coords(self) -> np.ndarray:
        return self.vertices[self.triangles]  # (nT, 3, 2)

    @property
    def signed_areas(self) -> np.ndarray:
        def areas():
            p = self.tri_coords
            d1 = p[:, 1] - p[:, 0]
            d2 = p[:, 2] - p[:, 0]
            return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

        return self._cached("areas", areas)

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @property
    def centroids(self) -> np.ndarray:
        return self.tri_coords.mean(axis=1)

    @property
    def diameters(self) -> np.ndarray:
        """h_T, the longest edge of each triangle."""
        return self.edge_lengths[self.tri_edges].max(axis=1)

    def geometry(self, t: int) -> ElementGeometry:
        return ElementGeometry(
            coords=self.tri_coords[t].copy(),
            area=float(self.areas[t]),
            centroid=self.centroids[t],
            diameter=float(self.diameters[t]),
        )

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @property
    def outward_normals(self) -> np.ndarray:
        """(nT, 3, 2) outward unit normals, assuming CCW triangles."""
        p = self.tri_coords
        q = np.roll(p, -1, axis=1)
        t = q - p
        n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    # -- io ---------------------------------------------------------------
    def to_text(self) -> str:
        lines = ["wgmesh 1", f"V {self.n_vertices}"]
        lines += [f"{x!r} {y!r}" for x, y in self.vertices.tolist()]
        lines.append(f"T {self.n_triangles}")
        lines += [f"{i} {j} {k}" for i, j, k in self.triangles.tolist()]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


def parse_mesh(text: str) -> Mesh:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split() != ["wgmesh", "1"]:
        raise ValueError("not a 'wgmesh 1' file")
    pos = 1

    def section(tag, width, dtype):
        nonlocal pos
        head = lines[pos].split()
        if len(head) != 2 or head[0] != tag:
            raise ValueError(f"expected '{tag} <count>' at line {pos + 1}")
        count = int(head[1])
        rows = [ln.split() for ln in lines[pos + 1 : pos + 1 + count]]
        if len(rows) != count or any(len(r) != width for r in rows):
            raise ValueError(f"malformed '{tag}' section")
        pos += 1 + count
        return np.array(rows, dtype=dtype).reshape(count, width)

    vertices = section("V", 2, float)
    triangles = section("T", 3, np.int64)
    return Mesh.from_arrays(vertices, triangles)


def load_mesh(path) -> Mesh:
    return parse_mesh(Path(path).read_text())


def build_unit_square_mesh(n: int) -> Mesh:
    """n x n squares on (0,1)^2, each cut by its negative-slope diagonal."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    s = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(s, s, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (j * (n + 1) + i).ravel()
    v10, v01 = v00 + 1, v00 + n + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v01])
    upper = np.column_stack([v10, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh.from_arrays(vertices, triangles)


def build_lshape_initial() -> Mesh:
    """Six-triangle mesh of (-1,1)^2 minus [0,1)x(-1,0].

    All three square diagonals run through the reentrant corner, which
    makes the mesh symmetric about the line y = -x.
    """
    vertices = np.array(
        [
            [-1.0, -1.0], [0.0, -1.0],
            [-1.0, 0.0], [0.0, 0.0], [1.0, 0.0],
            [-1.0, 1.0], [0.0, 1.0], [1.0, 1.0],
        ]
    )
    triangles = np.array(
        [
            [0, 1, 3], [0, 3, 2],  # lower-left square
            [2, 3, 5], [3, 6, 5],  # upper-left square
            [3, 4, 7], [3, 7, 6],  # upper-right square
        ]
    )
    return Mesh.from_arrays(vertices, triangles)


def refine_uniform(m: Mesh) -> Mesh:
    """Red refinement: split every triangle into four via edge midpoints."""
    mids = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
    vertices = np.vstack([m.vertices, mids])
    v0, v1, v2 = m.triangles.T
    m01, m12, m20 = (m.n_vertices + m.tri_edges).T
    children = np.stack(
        [
            np.column_stack([v0, m01, m20]),
            np.column_stack([m01, v1, m12]),
            np.column_stack([m20, m12, v2]),
            np.column_stack([m01, m12, m20]),
        ],
        axis=1,
    ).reshape(-1, 3)
    return Mesh.from_arrays(vertices, children)


def lshape_level(level: int) -> Mesh:
    """Level 1 is the initial L-shape mesh; each level refines once more."""
    if level < 1:
        raise ValueError("levels start at 1")
    m = build_lshape_initial()
    for _ in range(level - 1):
        m = refine_uniform(m)
    return m


def validate(m: Mesh, tol: float = 1e-12) -> list[str]:
    """Check the mesh invariants; returns one message per violation."""
    report = []
    if m.triangles.size and (m.triangles.min() < 0 or m.triangles.max() >= m.n_vertices):
        report.append("triangle references a vertex index out of range")
        return report
    for t in np.flatnonzero(m.signed_areas <= 0):
        report.append(f"triangle {t}: non-positive signed area {m.signed_areas[t]:.3e}")
    for e in np.flatnonzero((m.edge_ntris < 1) | (m.edge_ntris > 2)):
        report.append(f"edge {e}: {m.edge_ntris[e]} adjacent triangles")

    if np.any(m.edge_lengths <= 0):
        for e in np.flatnonzero(m.edge_lengths <= 0):
            report.append(f"edge {e}: zero length")
        return report
    n = m.edge_normals
    bad = np.abs(np.linalg.norm(n, axis=1) - 1.0) > 1e-14
    for e in np.flatnonzero(bad):
        report.append(f"edge {e}: normal is not unit")
    t_unit = m.edge_tangents / m.edge_lengths[:, None]
    for e in np.flatnonzero(np.abs((n * t_unit).sum(axis=1)) > 1e-14):
        report.append(f"edge {e}: normal not perpendicular to edge")

    # sigma from geometry must agree with the stored index rule
    nT = m.outward_normals
    sig = np.einsum("tlx,tlx->tl", nT, n[m.tri_edges])
    wrong = np.abs(sig - m.tri_signs) > 1e-12
    for t, l in zip(*np.nonzero(wrong)):
        report.append(f"triangle {t} edge {l}: outward normal disagrees with sign {m.tri_signs[t, l]}")
    interior = m.edge_ntris == 2
    if np.any(interior):
        s_sum = np.zeros(m.n_edges)
        np.add.at(s_sum, m.tri_edges.ravel(), m.tri_signs.ravel())
        for e in np.flatnonzero(interior & (s_sum != 0)):
            report.append(f"edge {e}: adjacent outward normals do not oppose")

    if not report:
        used = np.unique(m.triangles)
        V = len(used)
        # V - E + (F + 1) = 2 for a simply connected mesh
        if V - m.n_edges + m.n_triangles + 1 != 2:
            report.append(
                f"Euler characteristic mismatch: V={V} E={m.n_edges} F={m.n_triangles}"
            )
    return report
