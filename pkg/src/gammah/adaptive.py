"""Adaptive choice of the power level and gamma-driven mesh refinement."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gammah.assembly import Pencil, ProblemSpec, build_pencil
from gammah.diagnostics import LocalGammaField, local_gamma_pencil
from gammah.errors import InvalidArgumentError
from gammah.linalg import SolverConfig, smallest_singular_pencil
from gammah.mesh import TriMesh, bisect_refine
from gammah.util import csv_line

CYCLE_CSV_HEADER = "cycle,n_elements,min_gamma,max_gamma,n_marked,theta"


@dataclass
class PowerSelectionResult:
    m_selected: int
    history: list
    converged: bool
    eps_tol: float
    degenerate: bool = False


def select_power_level(pencil: Pencil, eps_tol: float = 1e-2, m_max: int = 5,
                       cfg: SolverConfig | None = None) -> PowerSelectionResult:
    """Smallest ``m`` whose relative change ``|g(m+1) - g(m)| / g(m)`` is below ``eps_tol``.

    ``g(m)`` is computed matrix-free and each value is reused for the next
    comparison. If no ``m <= m_max`` qualifies the result is not converged
    and ``m_selected = m_max``. A value of zero stops early as degenerate.
    """
    if not eps_tol > 0:
        raise InvalidArgumentError("eps_tol must be positive")
    if int(m_max) != m_max or m_max < 1:
        raise InvalidArgumentError("m_max must be an integer >= 1")
    cfg = cfg or SolverConfig()

    def g(m):
        return float(smallest_singular_pencil(pencil.A, pencil.M, pencil.lam, m, cfg,
                                              ops=pencil.ops).gamma)

    history = [(1, g(1))]
    if history[0][1] <= 0:
        return PowerSelectionResult(1, history, False, eps_tol, degenerate=True)
    for m in range(1, int(m_max) + 1):
        cur = history[-1][1]
        nxt = g(m + 1)
        history.append((m + 1, nxt))
        if nxt <= 0:
            return PowerSelectionResult(m, history, False, eps_tol, degenerate=True)
        if abs(nxt - cur) / cur < eps_tol:
            return PowerSelectionResult(m, history, True, eps_tol)
    return PowerSelectionResult(int(m_max), history, False, eps_tol)


@dataclass
class RefinementState:
    mesh: TriMesh
    gamma_field: LocalGammaField
    theta: float
    marked: set
    cycle: int

    def csv_row(self) -> str:
        f = self.gamma_field
        return csv_line([self.cycle, self.mesh.n_triangles, f.min, f.max, len(self.marked),
                         self.theta])


def marked_elements(field_: LocalGammaField, tau: float):
    """``(theta, {K : gamma(K) < theta})`` with ``theta = tau * min_K gamma(K)``."""
    theta = tau * field_.min
    marked = set(np.flatnonzero(field_.values < theta).tolist())
    return theta, marked


def smooth_mesh(mesh: TriMesh) -> TriMesh:
    """Mesh smoothing hook; intentionally the identity."""
    return mesh


def adaptive_refine(mesh: TriMesh, spec: ProblemSpec, lam, tau: float, l_max: int,
                    cycles: int, state_callback=None):
    """Refine where the local reduced minimum modulus is small.

    Each cycle assembles on the current mesh, computes ``gamma_h(K)`` on
    vertex patches, marks ``{K : gamma_h(K) < tau * min gamma_h}`` and
    bisects with closure. For ``tau <= 1`` nothing can be marked, so the
    mesh is returned unchanged.
    """
    if not isinstance(mesh, TriMesh) or mesh.n_triangles == 0:
        raise InvalidArgumentError("adaptive refinement needs a nonempty TriMesh")
    if not tau > 0:
        raise InvalidArgumentError("tau must be positive")
    if int(cycles) != cycles or cycles < 1:
        raise InvalidArgumentError("cycles must be an integer >= 1")
    states = []
    for cycle in range(int(cycles)):
        pencil = build_pencil(spec, mesh, lam)
        field_ = local_gamma_pencil(pencil)
        theta, marked = marked_elements(field_, tau)
        state = RefinementState(mesh, field_, theta, marked, cycle)
        states.append(state)
        if state_callback is not None:
            state_callback(state)
        if marked:
            mesh = smooth_mesh(bisect_refine(mesh, marked, l_max))
    return mesh, states
