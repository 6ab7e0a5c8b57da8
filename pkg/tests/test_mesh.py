import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wgbiharmonic.mesh import (
    Mesh,
    build_lshape_initial,
    build_unit_square_mesh,
    load_mesh,
    lshape_level,
    parse_mesh,
    refine_uniform,
    validate,
)


@pytest.mark.parametrize("n, nt, ne, nv", [(1, 2, 5, 4), (2, 8, 16, 9), (4, 32, 56, 25)])
def test_unit_square_counts(n, nt, ne, nv):
    m = build_unit_square_mesh(n)
    assert (m.n_triangles, m.n_edges, m.n_vertices) == (nt, ne, nv)
    assert m.n_vertices - m.n_edges + m.n_triangles + 1 == 2
    assert validate(m) == []


def test_unit_square_rejects_zero():
    with pytest.raises(ValueError):
        build_unit_square_mesh(0)


def test_unit_square_diagonals_have_negative_slope():
    m = build_unit_square_mesh(3)
    t = m.edge_tangents
    diag = np.abs(t[:, 0] * t[:, 1]) > 1e-12
    assert diag.sum() == 9
    assert np.all(t[diag, 0] * t[diag, 1] < 0)


def test_lshape_initial():
    m = build_lshape_initial()
    assert (m.n_triangles, m.n_vertices, m.n_edges) == (6, 8, 13)
    assert m.areas.sum() == pytest.approx(3.0, abs=1e-14)
    corner = np.flatnonzero(np.all(m.vertices == 0.0, axis=1))
    assert len(corner) == 1 and m.boundary_vertices[corner[0]]
    assert validate(m) == []
    # symmetric under reflection about y = -x
    refl = -m.vertices[:, ::-1]
    key = lambda v: sorted(map(tuple, np.round(v, 12)))
    assert key(refl) == key(m.vertices)
    tri_sets = {frozenset(map(tuple, np.round(m.vertices[t], 12))) for t in m.triangles}
    assert {frozenset(map(tuple, np.round(refl[t], 12))) for t in m.triangles} == tri_sets


def test_refine_uniform():
    m = build_lshape_initial()
    r = refine_uniform(m)
    assert r.n_triangles == 24
    assert r.areas.sum() == pytest.approx(3.0, abs=1e-12)
    assert r.h == pytest.approx(m.h / 2)
    assert validate(r) == []
    assert lshape_level(2).n_triangles == 24


def test_refined_boundary_lies_on_parent_boundary():
    m = build_lshape_initial()
    r = refine_uniform(m)
    pa = m.vertices[m.edges[m.boundary_edges]]
    for e in np.flatnonzero(r.boundary_edges):
        mid = r.vertices[r.edges[e]].mean(axis=0)
        d = pa[:, 1] - pa[:, 0]
        s = np.einsum("ij,ij->i", mid - pa[:, 0], d) / np.einsum("ij,ij->i", d, d)
        cross = (mid - pa[:, 0])[:, 0] * d[:, 1] - (mid - pa[:, 0])[:, 1] * d[:, 0]
        assert np.any((np.abs(cross) < 1e-12) & (s > 0) & (s < 1))


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2))
def test_refinement_preserves_area_and_validity(n, times):
    m = build_unit_square_mesh(n)
    for _ in range(times):
        m = refine_uniform(m)
    assert m.areas.sum() == pytest.approx(1.0, abs=1e-12)
    assert validate(m) == []


def test_normals_deterministic_and_orthonormal():
    a, b = build_unit_square_mesh(5), build_unit_square_mesh(5)
    assert np.array_equal(a.edge_normals, b.edge_normals)
    n, t = a.edge_normals, a.edge_tangents
    assert np.abs(np.linalg.norm(n, axis=1) - 1).max() <= 1e-14
    assert np.abs(np.einsum("ij,ij->i", n, t)).max() <= 1e-14
    # rotating the unit tangent a -> b by -90 degrees
    assert np.allclose(n, np.stack([t[:, 1], -t[:, 0]], axis=1) / np.linalg.norm(t, axis=1)[:, None])


def test_interior_sigma_sum_zero():
    m = lshape_level(3)
    s = np.zeros(m.n_edges)
    np.add.at(s, m.tri_edges.ravel(), m.tri_signs.ravel())
    assert np.all(s[~m.boundary_edges] == 0)
    on = m.outward_normals
    assert np.allclose(np.einsum("tlx,tlx->tl", on, m.edge_normals[m.tri_edges]), m.tri_signs)


def test_geometry_diameter_is_longest_edge():
    m = build_unit_square_mesh(2)
    g = m.geometry(0)
    assert g.diameter == pytest.approx(np.sqrt(2) / 2)
    assert g.area == pytest.approx(1 / 8)


def test_validate_duplicated_triangle():
    m = build_unit_square_mesh(2)
    bad = Mesh.from_arrays(m.vertices, np.vstack([m.triangles, m.triangles[:1]]))
    report = validate(bad)
    assert any("3 adjacent" in r or "adjacent triangles" in r for r in report), report


def test_validate_clockwise_triangle():
    m = build_unit_square_mesh(2)
    t = m.triangles.copy()
    t[0] = t[0][[0, 2, 1]]
    report = validate(Mesh.from_arrays(m.vertices, t))
    assert any("triangle 0" in r and "area" in r for r in report), report


def test_text_roundtrip(tmp_path):
    m = lshape_level(2)
    p = tmp_path / "l.msh"
    m.save(p)
    text = p.read_text()
    assert text.startswith("wgmesh 1\nV 21\n")
    r = load_mesh(p)
    assert np.array_equal(r.vertices, m.vertices) and np.array_equal(r.triangles, m.triangles)
    assert np.array_equal(r.edge_normals, m.edge_normals)


@pytest.mark.parametrize("text", ["", "wgmesh 2\nV 0\nT 0\n", "wgmesh 1\nV 2\n0 0\n", "wgmesh 1\nV 1\n0 x\nT 0\n"])
def test_parse_rejects_garbage(text):
    with pytest.raises(ValueError):
        parse_mesh(text)
