"""Meshes, global edge normals and the sign that makes v_n single valued.

Each edge carries one normal n_e, fixed by the order of its vertex indices.
A triangle sees that edge with sign sigma = n_T . n_e, and the two
triangles sharing an interior edge always see opposite signs.
"""
import numpy as np

from wgbiharmonic.mesh import build_unit_square_mesh, lshape_level, refine_uniform, validate

m = build_unit_square_mesh(2)
print(f"unit square n=2: V={m.n_vertices} E={m.n_edges} T={m.n_triangles}")
print("V - E + T + 1 =", m.n_vertices - m.n_edges + m.n_triangles + 1)

# normals on the first few edges, and who sees them with which sign
for e in range(4):
    edge = m.edge(e)
    sides = [(int(t), int(m.tri_signs[t, list(m.tri_edges[t]).index(e)])) for t in edge.adjacent_tris]
    print(f"edge {e} {edge.vertex_ids}: n_e={np.round(edge.normal, 3)}  (triangle, sigma)={sides}")

# interior sigma sums vanish everywhere
s = np.zeros(m.n_edges)
np.add.at(s, m.tri_edges.ravel(), m.tri_signs.ravel())
print("max |sigma_1 + sigma_2| on interior edges:", np.abs(s[~m.boundary_edges]).max())

# the L-shape: six triangles around the reentrant corner, then red refinement
for level in (1, 2, 3):
    L = lshape_level(level)
    print(f"L-shape level {level}: T={L.n_triangles} area={L.areas.sum():.12g} h={L.h:.4f} valid={not validate(L)}")

# refinement keeps the area and the invariants
r = refine_uniform(refine_uniform(m))
print("refined twice: T =", r.n_triangles, "area =", r.areas.sum(), "report:", validate(r))
