"""Pencils (A, M) for the model operators: P1 finite elements and FD transport.

Matrices are returned as CSR. Real data stays ``float64``; complex entries
(complex coefficients or a complex shift) promote to ``complex128``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from gammah import kernels
from gammah.errors import (AssemblyError, InvalidArgumentError, NotPositiveDefiniteError,
                           UnsupportedError)
from gammah.mesh import Mesh1D, TriMesh

KINDS = ("schrodinger_1d", "convection_diffusion_1d", "laplace_potential_2d",
         "convection_diffusion_2d", "transport_fd")
BCS = ("dirichlet_both", "mixed_left_dirichlet_right_neumann")
FD_SCHEMES = ("upwind", "central")
WEIGHTINGS = ("mass", "identity")


@dataclass(frozen=True)
class ProblemSpec:
    """Constant-coefficient model problem ``-eps u'' + beta.grad u + (c + V) u``.

    ``beta`` is a scalar for 1D kinds and a 2-vector for 2D kinds. ``supg_delta``
    scales the streamline diffusion parameter ``delta_K = supg_delta * h_K / |beta|``.
    """

    kind: str
    epsilon: float = 1.0
    beta: object = 0.0
    c: float = 0.0
    potential: float = 0.0
    supg_delta: float = 0.0
    fd_scheme: str = "upwind"
    bc: str = "dirichlet_both"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown problem kind {self.kind!r}")
        if self.bc not in BCS:
            raise InvalidArgumentError(f"unknown boundary condition {self.bc!r}")
        if self.fd_scheme not in FD_SCHEMES:
            raise InvalidArgumentError(f"unknown FD scheme {self.fd_scheme!r}")
        if not self.epsilon >= 0:
            raise InvalidArgumentError("epsilon must be >= 0")
        if not 0.0 <= self.supg_delta <= 0.5:
            raise InvalidArgumentError("supg_delta must lie in [0, 1/2]")
        if self.kind.endswith("_2d"):
            b = np.broadcast_to(np.asarray(self.beta, dtype=float), (2,))
            object.__setattr__(self, "beta", (float(b[0]), float(b[1])))
        else:
            if np.ndim(self.beta) != 0:
                raise InvalidArgumentError("1D kinds take a scalar beta")
            object.__setattr__(self, "beta", float(self.beta))
        if self.kind == "laplace_potential_2d" and any(self.beta):
            raise InvalidArgumentError("laplace_potential_2d has no convection term")
        if self.epsilon == 0 and not (self.kind == "transport_fd" or self.supg_delta > 0
                                      or self.beta_norm > 0):
            raise InvalidArgumentError("epsilon = 0 requires transport, SUPG or a convection field")

    @property
    def beta_norm(self) -> float:
        return float(np.hypot(*self.beta)) if isinstance(self.beta, tuple) else abs(self.beta)


def _hermitian_defect(M) -> float:
    d = (M - M.conj().T).tocoo()
    return float(np.abs(d.data).max()) if d.nnz else 0.0


def spd_certificate(M) -> bool:
    """Cheap sufficient test for positive definiteness of a Hermitian matrix.

    Positive diagonal plus irreducible diagonal dominance, with strict
    dominance in at least one row of every connected block.
    """
    M = sp.csr_matrix(M)
    d = M.diagonal().real
    if np.any(d <= 0):
        return False
    off = np.asarray(abs(M).sum(axis=1)).ravel() - np.abs(M.diagonal())
    slack = d - off
    tol = 1e-14 * d
    if np.any(slack < -tol):
        return False
    strict = slack > tol
    ncomp, labels = connected_components(M, directed=False)
    return bool(np.all(np.bincount(labels[strict], minlength=ncomp) > 0))


@dataclass(frozen=True, eq=False)
class Pencil:
    """Shifted pencil ``A - lam M`` with Hermitian positive definite ``M``.

    Optional ``mesh``/``dof_map`` record where the pencil was assembled so
    local diagnostics can extract element patches.
    """

    A: sp.spmatrix
    M: sp.spmatrix
    lam: complex = 0.0
    mesh: object = field(default=None, repr=False)
    dof_map: np.ndarray = field(default=None, repr=False)
    h: float = None

    def __post_init__(self):
        A = sp.csr_matrix(self.A)
        M = sp.csr_matrix(self.M)
        if A.shape[0] != A.shape[1] or M.shape != A.shape:
            raise InvalidArgumentError(f"A {A.shape} and M {M.shape} must be square and equal")
        for name, X in (("A", A), ("M", M)):
            if not np.all(np.isfinite(X.data)):
                raise InvalidArgumentError(f"{name} has non-finite entries")
        scale = max(1.0, float(np.abs(M.data).max()) if M.nnz else 1.0)
        if _hermitian_defect(M) > 1e-12 * scale:
            raise InvalidArgumentError("M is not Hermitian")
        if not spd_certificate(M):
            # fall back to an actual factorization
            from gammah.linalg import cholesky_spd
            try:
                cholesky_spd(M)
            except NotPositiveDefiniteError:
                raise InvalidArgumentError("M is not positive definite") from None
        A.sort_indices()
        M.sort_indices()
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "lam", complex(self.lam))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @cached_property
    def shifted(self):
        """``A - lam M`` in CSR, real when possible."""
        lam = self.lam.real if self.lam.imag == 0 else self.lam
        S = (self.A - lam * self.M).tocsr()
        S.sort_indices()
        return S

    @property
    def is_hermitian(self) -> bool:
        scale = max(1.0, float(np.abs(self.A.data).max()) if self.A.nnz else 1.0)
        return _hermitian_defect(self.A) <= 1e-10 * scale

    @cached_property
    def ops(self):
        """Shared factorizations of ``A - lam M`` and ``M`` (built lazily)."""
        from gammah.linalg import PencilOperators
        return PencilOperators(self.A, self.M, self.lam)

    def with_lambda(self, lam) -> "Pencil":
        return Pencil(self.A, self.M, lam, mesh=self.mesh, dof_map=self.dof_map, h=self.h)


def _coo(rows, cols, vals, n):
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _check_1d(mesh, spec):
    if not isinstance(mesh, Mesh1D):
        raise InvalidArgumentError("expected a Mesh1D")
    if spec.kind not in ("schrodinger_1d", "convection_diffusion_1d"):
        raise InvalidArgumentError(f"kind {spec.kind!r} is not a 1D finite-element problem")
    if not mesh.is_uniform:
        raise UnsupportedError("1D assembly requires a uniform mesh")


def _dof_1d(n_cells, bc):
    dof = np.arange(-1, n_cells, dtype=np.int64)
    if bc == "dirichlet_both":
        dof[-1] = -1
    return dof, int(dof.max()) + 1


def _cell_matrices_1d(mesh, spec, supg):
    """Triplets for (A, M) from the 2x2 cell matrices."""
    N = mesh.n_cells
    h = 1.0 / N
    eps, beta = spec.epsilon, spec.beta
    stiff = eps / h * np.array([[1.0, -1.0], [-1.0, 1.0]])
    # C[i, j] = int beta phi_j' phi_i over one cell
    conv = beta / 2.0 * np.array([[-1.0, 1.0], [-1.0, 1.0]])
    mass = h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    a_loc = stiff + conv + (spec.c + spec.potential) * mass
    if supg:
        delta_k = spec.supg_delta * h / abs(beta)
        a_loc = a_loc + delta_k * beta ** 2 / h * np.array([[1.0, -1.0], [-1.0, 1.0]])
    dof, n = _dof_1d(N, spec.bc)
    cells = mesh.cells
    d = dof[cells]
    r = np.broadcast_to(d[:, :, None], (N, 2, 2))
    c = np.broadcast_to(d[:, None, :], (N, 2, 2))
    keep = (r >= 0) & (c >= 0)
    av = np.broadcast_to(a_loc, (N, 2, 2))[keep]
    mv = np.broadcast_to(mass, (N, 2, 2))[keep]
    return _coo(r[keep], c[keep], av, n), _coo(r[keep], c[keep], mv, n)


def assemble_1d(mesh: Mesh1D, spec: ProblemSpec):
    """P1 Galerkin matrices ``(A, M)`` on a uniform 1D grid.

    ``dirichlet_both`` keeps the N-1 interior hat functions; the mixed
    condition also keeps the right-end function with natural treatment.
    """
    _check_1d(mesh, spec)
    return _cell_matrices_1d(mesh, spec, supg=False)


def _check_2d(mesh, spec):
    if not isinstance(mesh, TriMesh):
        raise InvalidArgumentError("expected a TriMesh")
    if spec.kind not in ("laplace_potential_2d", "convection_diffusion_2d"):
        raise InvalidArgumentError(f"kind {spec.kind!r} is not a 2D finite-element problem")


def _assemble_tri(mesh, spec, supg, eliminate_boundary=True):
    dof = mesh.dof_map() if eliminate_boundary else np.arange(mesh.n_vertices, dtype=np.int64)
    n = int(dof.max()) + 1 if dof.size else 0
    if n == 0:
        raise InvalidArgumentError("mesh has no interior degrees of freedom")
    bx, by = spec.beta
    rows, cols, av, mv, bad = kernels.p1_triplets(
        np.ascontiguousarray(mesh.vertices), np.ascontiguousarray(mesh.triangles),
        np.ascontiguousarray(dof), float(spec.epsilon), float(bx), float(by),
        float(spec.supg_delta) if supg else 0.0)
    if bad >= 0:
        raise AssemblyError(f"degenerate triangle {bad} (area < 1e-14)", element=int(bad))
    M = _coo(rows, cols, mv, n)
    A = _coo(rows, cols, av, n)
    react = spec.c + spec.potential
    if react:
        A = (A + react * M).tocsr()
    return A, M


def assemble_2d(mesh: TriMesh, spec: ProblemSpec, eliminate_boundary: bool = True):
    """P1 Galerkin matrices over the interior vertices (homogeneous Dirichlet).

    With ``eliminate_boundary=False`` every vertex is a DOF, which is useful
    for partition-of-unity checks.
    """
    _check_2d(mesh, spec)
    return _assemble_tri(mesh, spec, supg=False, eliminate_boundary=eliminate_boundary)


def assemble_supg(mesh, spec: ProblemSpec):
    """Galerkin matrices plus streamline diffusion ``sum_K delta_K (beta.grad u, beta.grad v)_K``."""
    if spec.beta_norm == 0:
        raise InvalidArgumentError("SUPG needs a nonzero convection field")
    if spec.supg_delta <= 0:
        raise InvalidArgumentError("SUPG needs supg_delta > 0")
    if isinstance(mesh, Mesh1D):
        _check_1d(mesh, spec)
        return _cell_matrices_1d(mesh, spec, supg=True)
    _check_2d(mesh, spec)
    return _assemble_tri(mesh, spec, supg=True)


def mass_1d(n: int, h: float, free_right: bool = False):
    """Consistent P1 mass matrix of size n; ``free_right`` halves the last diagonal."""
    main = np.full(n, 2.0 * h / 3.0)
    if free_right:
        main[-1] = h / 3.0
    off = np.full(n - 1, h / 6.0)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def fd_transport(n_cells: int, scheme: str = "upwind", weighting: str = "mass"):
    """Finite-difference discretizations of ``u'`` on [0, 1] with ``u(0) = 0``.

    ``upwind`` is N x N lower bidiagonal over u_1..u_N. ``central`` is
    (N-1) x (N-1) over u_1..u_{N-1}, closed by a first-order one-sided
    difference in the last row. ``weighting`` selects the P1 mass matrix
    of matching size or the identity as ``M``.
    """
    if int(n_cells) != n_cells or n_cells < 2:
        raise InvalidArgumentError(f"n_cells must be an integer >= 2, got {n_cells!r}")
    if scheme not in FD_SCHEMES:
        raise InvalidArgumentError(f"unknown FD scheme {scheme!r}")
    if weighting not in WEIGHTINGS:
        raise InvalidArgumentError(f"unknown weighting {weighting!r}")
    N = int(n_cells)
    h = 1.0 / N
    if scheme == "upwind":
        n = N
        A = sp.diags([np.full(n - 1, -1.0 / h), np.full(n, 1.0 / h)], [-1, 0], format="csr")
        M = mass_1d(n, h, free_right=True)
    else:
        n = N - 1
        if n == 1:
            A = sp.csr_matrix(np.array([[1.0 / h]]))
        else:
            sup = np.full(n - 1, 1.0 / (2 * h))
            sub = np.full(n - 1, -1.0 / (2 * h))
            main = np.zeros(n)
            main[-1] = 1.0 / h
            sub[-1] = -1.0 / h
            A = sp.diags([sub, main, sup], [-1, 0, 1], format="csr")
        M = mass_1d(n, h)
    if weighting == "identity":
        M = sp.identity(n, format="csr")
    A.eliminate_zeros()
    return A.tocsr(), M.tocsr()


def lumped(M):
    """Row-sum lumped diagonal version of a mass matrix."""
    return sp.diags(np.asarray(M.sum(axis=1)).ravel(), format="csr")


def build_pencil(spec: ProblemSpec, mesh, lam=0.0, *, weighting: str = "mass",
                 mass: str = "consistent") -> Pencil:
    """Assemble and wrap the pencil for ``spec`` on ``mesh``.

    ``mesh`` is an ``int`` cell count for ``transport_fd``. SUPG is used
    whenever ``spec.supg_delta > 0``.
    """
    dof_map = None
    if spec.kind == "transport_fd":
        A, M = fd_transport(int(mesh), spec.fd_scheme, weighting)
        h = 1.0 / int(mesh)
        mesh = None
    elif isinstance(mesh, Mesh1D):
        A, M = assemble_supg(mesh, spec) if spec.supg_delta > 0 else assemble_1d(mesh, spec)
        h = mesh.h
        dof_map, _ = _dof_1d(mesh.n_cells, spec.bc)
    else:
        A, M = assemble_supg(mesh, spec) if spec.supg_delta > 0 else assemble_2d(mesh, spec)
        h = mesh.h
        dof_map = mesh.dof_map()
    if mass == "lumped":
        M = lumped(M)
    elif mass != "consistent":
        raise InvalidArgumentError(f"unknown mass option {mass!r}")
    return Pencil(A, M, lam, mesh=mesh, dof_map=dof_map, h=h)


def write_matrix_market(path, A, comment: str = "") -> None:
    """Write ``A`` in coordinate format; symmetry is detected from the values."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, precision=17)


def read_matrix_market(path):
    p = Path(path)
    if not p.exists():
        raise InvalidArgumentError(f"no such file: {p}")
    try:
        return sp.csr_matrix(scipy.io.mmread(str(p)))
    except (ValueError, OSError) as exc:
        raise InvalidArgumentError(f"cannot read Matrix Market file {p}: {exc}") from None
