"""The compiled kernels and their numpy/LAPACK twins must agree."""
import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from gammah import _kernels_py, kernels
from gammah.assembly import ProblemSpec, assemble_2d
from gammah.linalg import envelope_arrays
from gammah.mesh import bisect_refine, lshape_mesh, structured_square_mesh

compiled = pytest.importorskip("gammah._kernels")


def test_backend_selected():
    assert kernels.BACKEND in ("compiled", "python")


def _triplet_matrix(out, n):
    rows, cols, a, m, bad = out
    assert bad == -1
    A = sp.coo_matrix((a, (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((m, (rows, cols)), shape=(n, n)).tocsr()
    return A, M


@pytest.mark.parametrize("supg", [0.0, 0.4])
def test_p1_triplets_agree(supg):
    mesh = bisect_refine(lshape_mesh(4), {0, 7, 20}, 3)
    xy = np.ascontiguousarray(mesh.vertices)
    tri = np.ascontiguousarray(mesh.triangles)
    dof = np.ascontiguousarray(mesh.dof_map())
    n = int(dof.max()) + 1
    args = (xy, tri, dof, 0.3, 1.5, -0.7, supg)
    Ac, Mc = _triplet_matrix(compiled.p1_triplets(*args), n)
    Ap, Mp = _triplet_matrix(_kernels_py.p1_triplets(*args), n)
    assert abs(Ac - Ap).max() <= 1e-13 * abs(Ap).max()
    assert abs(Mc - Mp).max() <= 1e-15


def test_p1_triplets_degenerate_agree():
    xy = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
    tri = np.array([[0, 1, 3], [0, 2, 1]], dtype=np.int64)
    dof = np.arange(4, dtype=np.int64)
    assert compiled.p1_triplets(xy, tri, dof, 1.0, 0.0, 0.0, 0.0)[4] == 1
    assert _kernels_py.p1_triplets(xy, tri, dof, 1.0, 0.0, 0.0, 0.0)[4] == 1


def _envelope(n):
    _, M = assemble_2d(structured_square_mesh(n), ProblemSpec("laplace_potential_2d"))
    perm = reverse_cuthill_mckee(M, symmetric_mode=True)
    return envelope_arrays(M[perm][:, perm])


def test_envelope_cholesky_and_solves_agree():
    first, ptr, env = _envelope(12)
    ec, ep = env.copy(), env.copy()
    assert compiled.envelope_cholesky(first, ptr, ec) == -1
    assert _kernels_py.envelope_cholesky(first, ptr, ep) == -1
    assert np.abs(ec - ep).max() <= 1e-14 * np.abs(ep).max()
    b = np.random.default_rng(1).standard_normal((len(first), 3))
    for name in ("envelope_solve_lower", "envelope_solve_upper"):
        xc, xp = b.copy(), b.copy()
        getattr(compiled, name)(first, ptr, ec, xc)
        getattr(_kernels_py, name)(first, ptr, ep, xp)
        assert np.abs(xc - xp).max() <= 1e-12 * np.abs(xp).max()


def test_envelope_failure_pivot_agrees():
    M = sp.csr_matrix(np.array([[4.0, 2, 0, 0], [2, 1, 0, 0], [0, 0, 3, 1], [0, 0, 1, 3]]))
    first, ptr, env = envelope_arrays(M)
    assert compiled.envelope_cholesky(first, ptr, env.copy()) == 1
    assert _kernels_py.envelope_cholesky(first, ptr, env.copy()) == 1
