import numpy as np
import pytest
import scipy.sparse as sp

from gammah.assembly import (Pencil, ProblemSpec, assemble_1d, assemble_2d, assemble_supg,
                             build_pencil, fd_transport, lumped, read_matrix_market,
                             write_matrix_market)
from gammah.errors import AssemblyError, InvalidArgumentError, UnsupportedError
from gammah.linalg import cholesky_spd, generalized_eigs_smallest
from gammah.mesh import Mesh1D, TriMesh, structured_square_mesh, uniform_mesh_1d


def test_1d_laplacian_entries():
    A, M = assemble_1d(uniform_mesh_1d(4), ProblemSpec("schrodinger_1d"))
    A, M = A.toarray(), M.toarray()
    assert np.allclose(np.diag(A), 8) and np.allclose(np.diag(A, 1), -4) and np.allclose(np.diag(A, -1), -4)
    assert np.allclose(np.diag(M), 1 / 6) and np.allclose(np.diag(M, 1), 1 / 24)


def test_1d_convection_block():
    mesh = uniform_mesh_1d(16)
    A, _ = assemble_1d(mesh, ProblemSpec("convection_diffusion_1d", epsilon=0.02, beta=8.0))
    K, _ = assemble_1d(mesh, ProblemSpec("convection_diffusion_1d", epsilon=0.02, beta=0.0))
    C = (A - K).toarray()
    assert np.allclose(np.diag(C), 0)
    assert np.allclose(np.diag(C, 1), 4) and np.allclose(np.diag(C, -1), -4)


def test_symmetry_split():
    mesh = uniform_mesh_1d(8)
    A, _ = assemble_1d(mesh, ProblemSpec("convection_diffusion_1d", epsilon=0.3, beta=0.0, c=2.0))
    assert abs(A - A.T).max() == 0
    B, _ = assemble_1d(mesh, ProblemSpec("convection_diffusion_1d", epsilon=0.3, beta=5.0, c=2.0))
    C = (B - A).toarray()
    assert np.allclose((B - B.T).toarray(), C - C.T)


def test_convection_antisymmetric_interior():
    A, _ = assemble_1d(uniform_mesh_1d(32),
                       ProblemSpec("convection_diffusion_1d", epsilon=0.0, beta=3.0))
    assert abs(A + A.T).max() <= 1e-12


def test_mixed_bc_keeps_right_node():
    A, M = assemble_1d(uniform_mesh_1d(4), ProblemSpec("schrodinger_1d",
                                                      bc="mixed_left_dirichlet_right_neumann"))
    assert A.shape == (4, 4)
    assert np.isclose(A[3, 3], 4) and np.isclose(M[3, 3], 1 / 12)


def test_nonuniform_1d_unsupported():
    mesh = Mesh1D(np.array([0.0, 0.3, 1.0]))
    with pytest.raises(UnsupportedError):
        assemble_1d(mesh, ProblemSpec("schrodinger_1d"))


def test_kind_mismatch():
    with pytest.raises(InvalidArgumentError):
        assemble_1d(uniform_mesh_1d(4), ProblemSpec("laplace_potential_2d"))
    with pytest.raises(InvalidArgumentError):
        assemble_2d(structured_square_mesh(2), ProblemSpec("schrodinger_1d"))


def reference_triangle():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return TriMesh(v, np.array([[0, 1, 2]]), np.ones(3, dtype=bool))


def test_reference_triangle_stiffness():
    A, M = assemble_2d(reference_triangle(), ProblemSpec("laplace_potential_2d"),
                       eliminate_boundary=False)
    K = np.array([[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]])
    assert np.allclose(A.toarray(), K, atol=1e-15)
    assert np.allclose(M.toarray(), (np.ones((3, 3)) + np.eye(3)) / 24)


def test_mass_partition_of_unity():
    _, M = assemble_2d(structured_square_mesh(20),
                       ProblemSpec("laplace_potential_2d", potential=25.0), eliminate_boundary=False)
    assert abs(M.sum() - 1.0) <= 1e-10


def test_pure_convection_rows_sum_to_zero():
    A, _ = assemble_2d(reference_triangle(),
                       ProblemSpec("convection_diffusion_2d", epsilon=0.0, beta=(1.0, 0.0)),
                       eliminate_boundary=False)
    assert np.allclose(np.asarray(A.sum(axis=1)).ravel(), 0, atol=1e-15)


def test_degenerate_triangle_reports_index():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 0.0], [0.5, 0.5]])
    tri = np.array([[0, 1, 2], [1, 3, 4], [0, 3, 1]])  # last one is flat
    mesh = TriMesh(v, tri, np.ones(5, dtype=bool))
    with pytest.raises(AssemblyError) as exc:
        assemble_2d(mesh, ProblemSpec("laplace_potential_2d"), eliminate_boundary=False)
    assert exc.value.element == 2


def test_supg_1d_stencil():
    h = 2.0 ** -6
    mesh = uniform_mesh_1d(64)
    base = ProblemSpec("convection_diffusion_1d", epsilon=0.01, beta=8.0)
    stab = ProblemSpec("convection_diffusion_1d", epsilon=0.01, beta=8.0, supg_delta=0.5)
    A0, M0 = assemble_1d(mesh, base)
    A1, M1 = assemble_supg(mesh, stab)
    delta_k = 0.5 * h / 8.0
    D = (A1 - A0).toarray()
    assert np.allclose(np.diag(D), 2 * delta_k * 64 / h)
    assert np.allclose(np.diag(D, 1), -delta_k * 64 / h)
    assert abs(M1 - M0).max() == 0


def test_supg_added_matrix_psd():
    mesh = structured_square_mesh(6)
    base = ProblemSpec("convection_diffusion_2d", epsilon=0.01, beta=(1.0, 2.0))
    stab = ProblemSpec("convection_diffusion_2d", epsilon=0.01, beta=(1.0, 2.0), supg_delta=0.3)
    D = (assemble_supg(mesh, stab)[0] - assemble_2d(mesh, base)[0]).toarray()
    assert np.allclose(D, D.T, atol=1e-13)
    assert np.linalg.eigvalsh(D).min() >= -1e-12


def test_supg_continuity_in_delta():
    mesh = uniform_mesh_1d(32)
    A0, _ = assemble_1d(mesh, ProblemSpec("convection_diffusion_1d", epsilon=0.1, beta=4.0))
    A1, _ = assemble_supg(mesh, ProblemSpec("convection_diffusion_1d", epsilon=0.1, beta=4.0,
                                            supg_delta=1e-12))
    assert abs(A1 - A0).max() < 1e-9


def test_supg_improves_conditioning():
    mesh = uniform_mesh_1d(64)
    Ag, _ = assemble_1d(mesh, ProblemSpec("convection_diffusion_1d", epsilon=1e-8, beta=8.0))
    As, _ = assemble_supg(mesh, ProblemSpec("convection_diffusion_1d", epsilon=1e-8, beta=8.0,
                                            supg_delta=0.5))
    assert np.linalg.cond(As.toarray()) / np.linalg.cond(Ag.toarray()) < 0.1


def test_supg_needs_convection():
    with pytest.raises(InvalidArgumentError):
        assemble_supg(uniform_mesh_1d(8), ProblemSpec("convection_diffusion_1d", supg_delta=0.2))


@pytest.mark.parametrize("kw", [dict(epsilon=-1.0), dict(supg_delta=0.6), dict(epsilon=0.0),
                                dict(bc="robin")])
def test_problem_spec_validation(kw):
    with pytest.raises(InvalidArgumentError):
        ProblemSpec("schrodinger_1d", **kw)


def test_fd_upwind_entries_and_inverse():
    A, M = fd_transport(4, "upwind")
    A = A.toarray()
    assert np.allclose(np.diag(A), 4) and np.allclose(np.diag(A, -1), -4)
    assert np.allclose(np.linalg.inv(A), 0.25 * np.tril(np.ones((4, 4))))


def test_fd_central_entries():
    A, _ = fd_transport(4, "central")
    A = A.toarray()
    assert np.allclose(np.diag(A, 1), 2)
    assert np.allclose(np.diag(A, -1)[:-1], -2)


def test_fd_identity_weighting():
    _, M = fd_transport(8, "upwind", "identity")
    assert abs(M - sp.identity(8)).max() == 0


def test_fd_rejects_small_grids():
    with pytest.raises(InvalidArgumentError):
        fd_transport(1, "upwind")


def test_mass_spd_everywhere():
    for M in (assemble_1d(uniform_mesh_1d(10), ProblemSpec("schrodinger_1d"))[1],
              assemble_2d(structured_square_mesh(5), ProblemSpec("laplace_potential_2d"))[1],
              fd_transport(10, "central")[1]):
        f = cholesky_spd(M)
        assert np.all(np.diag(f.lower_dense()) != 0)


def test_symmetric_problems_positive():
    for spec, mesh in ((ProblemSpec("schrodinger_1d", c=1.0, potential=2.0), uniform_mesh_1d(12)),
                       (ProblemSpec("laplace_potential_2d", potential=3.0), structured_square_mesh(5))):
        p = build_pencil(spec, mesh)
        assert p.is_hermitian
        assert generalized_eigs_smallest(p.A, p.M, 1).values[0] > 0


def test_lumped_mass_is_diagonal_row_sum():
    _, M = assemble_1d(uniform_mesh_1d(8), ProblemSpec("schrodinger_1d"))
    L = lumped(M)
    assert np.allclose(L.diagonal(), np.asarray(M.sum(axis=1)).ravel())
    assert L.nnz == 7


def test_pencil_validation():
    I = sp.identity(3, format="csr")
    with pytest.raises(InvalidArgumentError):
        Pencil(I, sp.identity(4, format="csr"))
    with pytest.raises(InvalidArgumentError):
        Pencil(I, sp.csr_matrix(np.array([[1.0, 2.0, 0], [0, 1, 0], [0, 0, 1]])))
    with pytest.raises(InvalidArgumentError):
        Pencil(I, sp.csr_matrix(np.diag([1.0, -1.0, 1.0])))
    with pytest.raises(InvalidArgumentError):
        Pencil(sp.csr_matrix(np.diag([np.nan, 1, 1])), I)


def test_complex_lambda_and_entries():
    A = sp.csr_matrix(np.array([[1 + 1j, 0.5], [0, 2]]))
    p = Pencil(A, sp.identity(2, format="csr"), 0.5 - 0.25j)
    assert p.shifted.dtype == np.complex128
    assert np.allclose(p.shifted.toarray(), A.toarray() - (0.5 - 0.25j) * np.eye(2))


@pytest.mark.parametrize("make", [
    lambda: assemble_1d(uniform_mesh_1d(7), ProblemSpec("convection_diffusion_1d", epsilon=0.1,
                                                        beta=3.0))[0],
    lambda: assemble_2d(structured_square_mesh(4), ProblemSpec("laplace_potential_2d"))[1],
    lambda: sp.csr_matrix(np.array([[1 + 2j, 0], [1e-300, -3.25j]])),
])
def test_matrix_market_roundtrip_bit_exact(tmp_path, make):
    A = sp.csr_matrix(make())
    write_matrix_market(tmp_path / "a.mtx", A)
    B = read_matrix_market(tmp_path / "a.mtx")
    assert B.shape == A.shape
    assert (abs(A - B)).max() == 0
