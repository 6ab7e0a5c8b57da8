"""The discrete weak Laplacian and the stabilizer on single elements.

For the projection Q_h u of a smooth u, the weak Laplacian equals the
L2 projection of the true Laplacian onto P_{k-2}. The stabilizer sees
only the mismatch between v_0 and the edge traces, so it vanishes on
Q_h p for every polynomial p of degree k.
"""
import numpy as np

from wgbiharmonic.element import ElementDofLayout, local_operators, project_Qh, weak_laplacian
from wgbiharmonic.mesh import build_unit_square_mesh
from wgbiharmonic.polybasis import project_tri
from wgbiharmonic.validation import local_vectors, random_poly

mesh = build_unit_square_mesh(4)
for k in (2, 3):
    lay = ElementDofLayout(k)
    print(f"k={k}: n0={lay.n0} local DOFs={lay.n_local} weak Laplacian space dim={lay.n_lap}")

    v = local_vectors(mesh, k, *project_Qh(mesh, k, lambda x, y: x**2 + y**2, lambda x, y: (2 * x, 2 * y)))
    dw = weak_laplacian(mesh, k, v)
    print("  Delta_w Q_h(x^2+y^2), constant coefficient range:", dw[:, 0].min(), dw[:, 0].max())

    def u(x, y):
        return np.exp(x) * np.sin(2 * y)

    def grad(x, y):
        return np.exp(x) * np.sin(2 * y), 2 * np.exp(x) * np.cos(2 * y)

    def lap(x, y):
        return -3 * np.exp(x) * np.sin(2 * y)

    v = local_vectors(mesh, k, *project_Qh(mesh, k, u, grad))
    diff = weak_laplacian(mesh, k, v) - project_tri(lap, k - 2, mesh.tri_coords)
    # the gap is the error of the default data quadrature, not of the identity
    print(f"  commuting identity for exp(x) sin(2y): max coefficient gap {np.abs(diff).max():.1e}")

    ops = local_operators(mesh, k)
    p, pg, _ = random_poly(np.random.default_rng(0), k)
    v = local_vectors(mesh, k, *project_Qh(mesh, k, p, pg))
    print(f"  max v'Sv over elements for a random P_{k}: {np.einsum('ei,eij,ej->e', v, ops.S, v).max():.1e}")
    print(f"  min eigenvalue of the A_00 blocks: {np.linalg.eigvalsh(ops.A[:, :lay.n0, :lay.n0]).min():.3e}")
