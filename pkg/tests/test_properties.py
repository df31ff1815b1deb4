import numpy as np
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from gammah.assembly import Pencil, ProblemSpec, build_pencil
from gammah.chains import SubspaceBasis, chain_report, kaashoek_taylor, subspace_gap
from gammah.diagnostics import gamma_h, numrange_distance, spectral_gap
from gammah.harness.experiments import jordan_similarity_case, oracle_values, random_pencil
from gammah.linalg import SolverConfig
from gammah.mesh import bisect_refine, is_conforming, lshape_mesh, structured_square_mesh

seeds = st.integers(0, 2 ** 32 - 1)


@settings(max_examples=25)
@given(n=st.integers(1, 8), lshape=st.booleans(), seed=seeds)
def test_refinement_stays_conforming_and_preserves_area(n, lshape, seed):
    rng = np.random.default_rng(seed)
    mesh = lshape_mesh(n) if lshape else structured_square_mesh(n)
    area = np.abs(mesh.signed_areas()).sum()
    for _ in range(3):
        k = int(rng.integers(0, mesh.n_triangles + 1))
        marked = set(rng.choice(mesh.n_triangles, size=k, replace=False).tolist())
        new = bisect_refine(mesh, marked, l_max=4)
        assert is_conforming(new)
        assert abs(np.abs(new.signed_areas()).sum() - area) <= 1e-12 * area
        assert np.all(new.signed_areas() > 0)
        assert len(np.unique(np.round(new.vertices, 12), axis=0)) == new.n_vertices
        assert new.n_triangles >= mesh.n_triangles
        mesh = new


@settings(max_examples=100)
@given(seed=seeds)
def test_chain_matches_jordan_structure(seed):
    S, asc = jordan_similarity_case(np.random.default_rng(seed))
    n = S.shape[0]
    r = chain_report(S, n + 1)
    assert all(k + rk == n for k, rk in zip(r.kernel_dims, r.range_ranks))
    assert (r.ascent, r.descent) == (asc, asc)
    for m in range(1, n + 2):
        assert r.kt_intersection_trivial[m] == (asc <= m)
    assert kaashoek_taylor(S, max(asc, 1))[0]


def _random_subspace(rng, n, k):
    return SubspaceBasis.span(rng.standard_normal((n, k)))


@settings(max_examples=50)
@given(seed=seeds, n=st.integers(2, 10), data=st.data())
def test_subspace_gap_is_a_metric(seed, n, data):
    k = data.draw(st.integers(1, n - 1))
    rng = np.random.default_rng(seed)
    E, F, G = (_random_subspace(rng, n, k) for _ in range(3))
    assert subspace_gap(E, F) == subspace_gap(F, E) or \
        abs(subspace_gap(E, F) - subspace_gap(F, E)) <= 1e-15
    assert subspace_gap(E, G) <= subspace_gap(E, F) + subspace_gap(F, G) + 1e-10
    assert 0 <= subspace_gap(E, F) <= 1
    assert subspace_gap(E, E) <= 1e-12


def _sparse_pencil(seed, n):
    return random_pencil(np.random.default_rng(seed), n)


@settings(max_examples=30)
@given(seed=seeds, n=st.integers(2, 30))
def test_bound_chain_on_random_pencils(seed, n):
    p = _sparse_pencil(seed, n)
    g = gamma_h(p)
    assert numrange_distance(p) <= g + 1e-10
    assert abs(g - oracle_values(p, 1)[0]) <= 1e-8 * g


@settings(max_examples=30)
@given(seed=seeds, n=st.integers(2, 30), lam=st.floats(-5, 5))
def test_hermitian_gamma_is_spectral_distance(seed, n, lam):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n))
    A = (X + X.T) / 2
    Y = rng.standard_normal((n, n))
    M = Y @ Y.T / n + np.eye(n)
    p = Pencil(sp.csr_matrix(A), sp.csr_matrix(M), lam)
    gap = spectral_gap(p)
    assert abs(gamma_h(p) - gap) <= 1e-8 * max(1.0, gap)


@settings(max_examples=20)
@given(seed=seeds, n=st.integers(3, 25))
def test_gamma_permutation_invariant(seed, n):
    p = _sparse_pencil(seed, n)
    perm = np.random.default_rng(seed + 1).permutation(n)
    q = Pencil(p.A[perm][:, perm], p.M[perm][:, perm], p.lam)
    assert abs(gamma_h(p) - gamma_h(q)) <= 1e-9 * gamma_h(p)
    assert abs(numrange_distance(p) - numrange_distance(q)) <= 1e-9 * max(1, numrange_distance(p))


@settings(max_examples=20)
@given(seed=seeds, n=st.integers(3, 25), c=st.floats(1e-3, 1e3))
def test_gamma_scaling(seed, n, c):
    p = _sparse_pencil(seed, n)
    g = gamma_h(p)
    # joint scaling of A and M leaves the pencil unchanged
    assert abs(gamma_h(Pencil(c * p.A, c * p.M, p.lam)) - g) <= 1e-8 * g
    # scaling A and lambda scales gamma
    assert abs(gamma_h(Pencil(c * p.A, p.M, c * p.lam)) - c * g) <= 1e-8 * c * g


@settings(max_examples=10)
@given(k=st.integers(3, 6), lam=st.floats(-30, 30))
def test_gamma_is_deterministic(k, lam):
    spec = ProblemSpec("convection_diffusion_1d", epsilon=0.02, beta=8.0)
    from gammah.mesh import uniform_mesh_1d
    p = build_pencil(spec, uniform_mesh_1d(2 ** k), lam)
    q = build_pencil(spec, uniform_mesh_1d(2 ** k), lam)
    cfg = SolverConfig()
    assert gamma_h(p, cfg) == gamma_h(q, cfg)
    assert numrange_distance(p) == numrange_distance(q)


@settings(max_examples=15)
@given(seed=seeds, n=st.integers(2, 20))
def test_numrange_grows_on_nested_grids(seed, n):
    p = _sparse_pencil(seed, n)
    vals = [numrange_distance(p, a) for a in (8, 16, 32, 64)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
