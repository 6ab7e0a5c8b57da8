import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wgbiharmonic.analysis import (
    ConvergenceTable,
    example1,
    example1_verbatim,
    example2,
    example3,
    example_mesh,
    get_example,
    l2_error,
    l2_norm,
    rate,
    run_convergence,
    triple_bar_error,
    triple_bar_norm,
)
from wgbiharmonic.element import ElementDofLayout, local_operators
from wgbiharmonic.mesh import build_unit_square_mesh, lshape_level
from wgbiharmonic.solver import WGFunction, assemble_full, solve_wg


def fd_biharmonic(u, x, y, d):
    """13-point stencil for the biharmonic."""
    c = 20 * u(x, y)
    c -= 8 * (u(x + d, y) + u(x - d, y) + u(x, y + d) + u(x, y - d))
    c += 2 * (u(x + d, y + d) + u(x + d, y - d) + u(x - d, y + d) + u(x - d, y - d))
    c += u(x + 2 * d, y) + u(x - 2 * d, y) + u(x, y + 2 * d) + u(x, y - 2 * d)
    return c / d**4


def sample_points(ex, rng, n=40):
    if ex.domain == "lshape":
        pts = rng.uniform(-0.95, 0.95, size=(4 * n, 2))
        keep = ~((pts[:, 0] > 0) & (pts[:, 1] < 0)) & (np.hypot(*pts.T) >= 0.3)
        keep &= ~((pts[:, 0] > -0.05) & (pts[:, 1] < 0.05))
        return pts[keep][:n]
    return rng.uniform(0.05, 0.95, size=(n, 2))


@pytest.mark.parametrize("ex", [example1(), example1_verbatim(), example2(), example3()], ids=lambda e: e.name)
def test_manufactured_derivatives(ex, rng):
    p = sample_points(ex, rng)
    x, y = p[:, 0], p[:, 1]
    d = 1e-6
    gx, gy = ex.grad(x, y)
    assert np.abs((ex.u(x + d, y) - ex.u(x - d, y)) / (2 * d) - gx).max() <= 1e-7
    assert np.abs((ex.u(x, y + d) - ex.u(x, y - d)) / (2 * d) - gy).max() <= 1e-7
    dd = 1e-4
    lap_fd = (ex.u(x + dd, y) + ex.u(x - dd, y) + ex.u(x, y + dd) + ex.u(x, y - dd) - 4 * ex.u(x, y)) / dd**2
    assert np.abs(lap_fd - ex.lap(x, y)).max() <= 1e-4 * max(1, np.abs(ex.lap(x, y)).max())
    f_fd = fd_biharmonic(ex.u, x, y, 1e-2)
    scale = max(np.abs(ex.f(x, y)).max(), np.abs(fd_biharmonic(lambda a, b: ex.u(a, b), x, y, 1e-2)).max(), 1.0)
    assert np.abs(f_fd - ex.f(x, y)).max() <= 1e-3 * scale


def test_example_boundary_data():
    t = np.linspace(0, 1, 11)
    for ex in (example1(), example2()):
        for x, y in [(t, 0 * t), (t, 1 + 0 * t), (0 * t, t), (1 + 0 * t, t)]:
            assert np.abs(ex.u(x, y)).max() <= 1e-15
    e1 = example1()
    assert np.abs(e1.g_n(t, 1 + 0 * t, 0 * t, 1 + 0 * t)).max() == 0
    ev = example1_verbatim()
    assert np.abs(ev.g_n(t, 1 + 0 * t, 0 * t, 1 + 0 * t)).max() > 1e-3


def test_example3_polar_conventions():
    ex = example3()
    # theta in [0, 3pi/2] over the L-shape, measured from the positive x-axis
    s = np.linspace(0.1, 1, 5)
    assert np.abs(ex.u(s, 0 * s)).max() <= 1e-15
    # theta = 3 pi/2 on the negative y-axis, where sin(5 theta/3) = 1
    assert np.allclose(ex.u(0 * s, -s), s ** (5 / 3), rtol=1e-14)
    assert ex.u(np.array(0.0), np.array(1.0)) == pytest.approx(np.sin(5 * np.pi / 6))
    gx, gy = ex.grad(np.array([0.0]), np.array([0.0]))
    assert gx[0] == 0 and gy[0] == 0
    assert np.all(ex.f(s, s) == 0)


def test_get_example():
    assert get_example(1).name == "example1"
    assert get_example(1, verbatim=True).name == "example1-verbatim"
    with pytest.raises(ValueError):
        get_example(4)


@pytest.mark.parametrize("k", [2, 3])
def test_errors_vanish_on_projection(k, square4):
    ex = example2()
    q = WGFunction.project(square4, k, ex.u, ex.grad)
    assert triple_bar_error(q, ex) <= 1e-10
    assert l2_error(q, ex) <= 1e-12


def test_l2_norm_of_constant(square4):
    v = WGFunction.zeros(square4, 2)
    v.interior[:, 0] = 2.5
    assert l2_norm(v) == pytest.approx(2.5, rel=1e-14)
    m = lshape_level(2)
    v = WGFunction.zeros(m, 3)
    v.interior[:, 0] = -1.5
    assert l2_norm(v) == pytest.approx(1.5 * np.sqrt(3.0), rel=1e-14)


def test_single_vb_dof_norm(square4):
    """A v_b on a boundary edge touches one element: stabilizer plus weak Laplacian term."""
    k = 2
    e = int(np.flatnonzero(square4.boundary_edges)[0])
    t = int(square4.edge_tris[e, 0])
    v = WGFunction.zeros(square4, k)
    v.vb[e, 0] = 1.0
    ops = local_operators(square4, k, [t])
    loc = v.local([t])[0]
    dw = np.linalg.solve(ops.M[0], ops.L[0] @ loc)
    expect = square4.edge_lengths[e] / square4.diameters[t] ** 3 + dw @ ops.M[0] @ dw
    assert triple_bar_norm(v) ** 2 == pytest.approx(expect, rel=1e-12)


@pytest.mark.parametrize("k", [2, 3])
def test_norm_equals_energy(k):
    mesh = lshape_level(2)
    gs = assemble_full(mesh, k)
    rng = np.random.default_rng(9)
    for _ in range(3):
        x = rng.standard_normal(gs.dofmap.n_total)
        a = np.sqrt(x @ (gs.full_matrix @ x))
        assert triple_bar_norm(WGFunction.from_vector(mesh, k, x)) == pytest.approx(a, rel=1e-10)


def test_norm_chunking_invariant():
    mesh = build_unit_square_mesh(6)
    x = np.random.default_rng(0).standard_normal(assemble_full(mesh, 2).dofmap.n_total)
    v = WGFunction.from_vector(mesh, 2, x)
    assert triple_bar_norm(v, chunk=7) == pytest.approx(triple_bar_norm(v), rel=1e-13)


def test_homogeneity(square4):
    ex = example2()
    uh, _ = solve_wg(square4, 2, ex.f, ex.boundary)
    d = uh - WGFunction.project(square4, 2, ex.u, ex.grad)
    assert triple_bar_norm(2 * d) == pytest.approx(2 * triple_bar_norm(d), rel=1e-12)
    assert l2_norm(2 * d) == pytest.approx(2 * l2_norm(d), rel=1e-12)


def test_rate_examples():
    assert rate(0.4, 0.1) == pytest.approx(2.0)
    assert rate(1.3440e-01, 7.2244e-02) == pytest.approx(0.8956, abs=5e-5)
    assert rate(3.3, 3.3) == 0.0
    for bad in [(0.0, 1.0), (1.0, -1.0), (float("nan"), 1.0)]:
        with pytest.raises(ValueError):
            rate(*bad)


@settings(max_examples=50)
@given(st.floats(1e-12, 1e6), st.floats(-10, 10))
def test_rate_inverts_scaling(e, p):
    assert rate(e, e * 2.0**-p) == pytest.approx(p, abs=1e-9)


def test_table_formats():
    t = ConvergenceTable("demo", 2)
    t.add(1, 0.25, 0.4, 0.04)
    t.add(2, 0.125, 0.2, 0.01)
    rows = t.to_csv().splitlines()
    assert rows[0] == "level,h,err_H2,rate_H2,err_L2,rate_L2"
    assert rows[1] == "1,0.25,0.4,,0.04,"
    assert rows[2] == "2,0.125,0.2,1.0,0.01,2.0"
    md = t.to_markdown()
    assert "| 1/8 | 2.0000e-01 | 1.0000 | 1.0000e-02 | 2.0000 |" in md


def test_example_mesh():
    m, h = example_mesh(2, 1)
    assert m.n_triangles == 32 and h == 0.25
    m, h = example_mesh(1, 3)
    assert m.n_triangles == 2 * 16**2 and h == 1 / 16
    m, h = example_mesh(3, 1)
    assert m.n_triangles == 6 * 16 and h == 0.25
    m, h = example_mesh(3, 1, lshape_start=0)
    assert m.n_triangles == 6 and h == 1.0
    with pytest.raises(ValueError):
        example_mesh(1, 0)


def test_run_convergence_example2():
    t = run_convergence(2, 2, 3)
    assert [r.level for r in t.rows] == [1, 2, 3]
    assert t.rows[0].rate_H2 is None
    assert all(r.err_H2 > 0 and r.err_L2 > 0 for r in t.rows)
    assert 0.85 <= t.rows[-1].rate_H2 <= 1.15
    assert 1.8 <= t.rows[-1].rate_L2 <= 2.2


def test_run_convergence_single_level():
    t = run_convergence(3, 2, 1)
    assert len(t.rows) == 1 and t.rows[0].rate_H2 is None
    assert t.to_csv().splitlines()[1].endswith(",")


def test_run_convergence_truncates_on_failure(monkeypatch):
    import wgbiharmonic.analysis as an

    calls = {"n": 0}
    real = an.solve_wg

    def flaky(mesh, *a, **kw):
        calls["n"] += 1
        if calls["n"] == 2:
            raise RuntimeError("boom")
        return real(mesh, *a, **kw)

    monkeypatch.setattr(an, "solve_wg", flaky)
    t = run_convergence(2, 2, 3)
    assert len(t.rows) == 1 and "level 2" in t.failure
    assert "stopped" in t.to_markdown()
