import numpy as np
import pytest
import scipy.sparse as sp

from gammah.adaptive import (CYCLE_CSV_HEADER, adaptive_refine, marked_elements,
                             select_power_level)
from gammah.assembly import Pencil, ProblemSpec, build_pencil
from gammah.diagnostics import LocalGammaField, gamma_power
from gammah.errors import InvalidArgumentError
from gammah.harness.experiments import (cd_pencil, corner_touching, independent_local_gamma,
                                        oracle_values, transport_pencil)
from gammah.mesh import TriMesh, lshape_mesh, structured_square_mesh

LAPLACE = ProblemSpec("laplace_potential_2d", epsilon=1.0)


def test_identity_shift_selects_first_power():
    I = sp.identity(6, format="csr")
    r = select_power_level(Pencil(2 * I, I, 1.0))
    assert r.m_selected == 1 and r.converged and not r.degenerate
    assert [m for m, _ in r.history] == [1, 2]
    assert all(abs(g - 1) < 1e-12 for _, g in r.history)


def test_upwind_does_not_converge():
    r = select_power_level(transport_pencil(2.0 ** -6, "upwind", "mass"), 1e-2, 3)
    assert not r.converged and r.m_selected == 3
    assert [m for m, _ in r.history] == [1, 2, 3, 4]


def test_cd_history_matches_dense_oracle():
    p = cd_pencil(2.0 ** -6)
    r = select_power_level(p, 1e-2, 3)
    assert 1 <= r.m_selected <= 3
    if r.converged:
        assert len(r.history) == r.m_selected + 1
    for m, g in r.history:
        ref = oracle_values(p, m)[0]
        assert abs(g - ref) / ref < 1e-8
        assert abs(g - gamma_power(p, m)[0]) <= 1e-12 * ref


def test_degenerate_pencil_stops_early():
    p = Pencil(sp.diags([1.0, 2.0]).tocsr(), sp.identity(2, format="csr"), 1.0)
    r = select_power_level(p)
    assert r.degenerate and not r.converged and r.m_selected == 1


def test_power_selection_argument_checks():
    p = cd_pencil(2.0 ** -4)
    with pytest.raises(InvalidArgumentError):
        select_power_level(p, eps_tol=0.0)
    with pytest.raises(InvalidArgumentError):
        select_power_level(p, m_max=0)


def test_marking_rule():
    f = LocalGammaField(np.array([1.0, 1.04, 1.06, np.inf]), [np.array([0])] * 4)
    theta, marked = marked_elements(f, 1.05)
    assert theta == pytest.approx(1.05)
    assert marked == {0, 1}
    assert marked_elements(f, 1.0)[1] == set()


def test_small_tau_is_a_noop():
    mesh = structured_square_mesh(4)
    final, states = adaptive_refine(mesh, LAPLACE, -1.0, 0.5, 3, 2)
    assert all(not s.marked for s in states)
    assert final is mesh


def test_lshape_marked_set_and_growth():
    mesh = lshape_mesh(8)
    final, states = adaptive_refine(mesh, LAPLACE, -1.0, 1.05, 3, 2)
    assert states[0].marked
    for s in states:
        p = build_pencil(LAPLACE, s.mesh, -1.0)
        vals = independent_local_gamma(s.mesh, p.A, p.M, -1.0, s.mesh.dof_map())
        assert np.allclose(vals, s.gamma_field.values, rtol=1e-10)
        theta = 1.05 * vals[np.isfinite(vals)].min()
        assert s.marked == set(np.flatnonzero(vals < theta).tolist())
        assert s.theta == pytest.approx(theta, rel=1e-12)
    assert states[1].mesh.n_triangles > states[0].mesh.n_triangles
    assert final.n_triangles > states[1].mesh.n_triangles
    spread = [s.gamma_field.max - s.gamma_field.min for s in states]
    assert spread[1] <= spread[0]


@pytest.mark.xfail(strict=True, reason="local gamma is not smallest at the reentrant corner, so "
                   "marks land away from it; see decisions ledger")
def test_lshape_marks_concentrate_at_corner():
    mesh = lshape_mesh(8)
    _, states = adaptive_refine(mesh, LAPLACE, -1.0, 1.05, 3, 1)
    marked = states[0].marked
    assert len(marked & corner_touching(mesh)) >= 0.5 * len(marked)


def test_cycle_csv_row():
    _, states = adaptive_refine(structured_square_mesh(3), LAPLACE, -1.0, 1.05, 2, 1)
    row = states[0].csv_row().split(",")
    assert len(row) == len(CYCLE_CSV_HEADER.split(","))
    assert row[0] == "0" and int(row[1]) == 18


def test_refine_argument_checks():
    empty = TriMesh(np.zeros((0, 2)), np.zeros((0, 3), dtype=int), np.zeros(0, dtype=bool))
    with pytest.raises(InvalidArgumentError):
        adaptive_refine(empty, LAPLACE, -1.0, 1.05, 2, 1)
    with pytest.raises(InvalidArgumentError):
        adaptive_refine(structured_square_mesh(2), LAPLACE, -1.0, 0.0, 2, 1)
    with pytest.raises(InvalidArgumentError):
        adaptive_refine(structured_square_mesh(2), LAPLACE, -1.0, 1.05, 2, 0)
