"""Scalar stability indicators of a pencil ``(A, M, lam)``.

All indicators refer to the symmetrized operator ``B = L^{-1}(A - lam M)L^{-*}``
with ``M = L L*``, i.e. ``A - lam M`` measured from the ``M``-norm into the
``M^{-1}``-norm.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.optimize import minimize_scalar

from gammah.assembly import Pencil
from gammah.errors import InvalidArgumentError
from gammah.linalg import (DENSE_LIMIT, PencilOperators, SolverConfig, cholesky_spd,
                           generalized_eigs_smallest, lanczos, largest_singular_pencil,
                           pencil_extreme_eig, smallest_singular_pencil, symmetrized_dense)
from gammah.mesh import Mesh1D, TriMesh
from gammah.util import csv_line

# dense SVD per pseudospectral sample up to this size, inverse Lanczos beyond
PSEUDO_SVD_LIMIT = 256
TRI_LANCZOS_MAX_ITER = 60

CSV_HEADER = "h,n,lambda_re,lambda_im,gamma_h,numrange_dist,spectral_gap,cond,pseudo_eps,pseudo_radius"


@dataclass
class DiagnosticsReport:
    gamma_h: float
    numrange_dist: float
    spectral_gap: float | None
    cond_number: float
    pseudo_radius: tuple
    gamma_powers: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    n: int = 0
    lam: complex = 0.0
    h: float | None = None

    def csv_row(self) -> str:
        eps, rad = self.pseudo_radius
        return csv_line([self.h, self.n, self.lam.real, self.lam.imag, self.gamma_h,
                         self.numrange_dist, self.spectral_gap, self.cond_number, eps, rad])


def _ops(pencil: Pencil) -> PencilOperators:
    return pencil.ops


def gamma_h(pencil: Pencil, cfg: SolverConfig | None = None) -> float:
    """Discrete reduced minimum modulus ``sigma_min(B)``."""
    return float(smallest_singular_pencil(pencil.A, pencil.M, pencil.lam, 1, cfg,
                                          ops=_ops(pencil)).gamma)


def gamma_power(pencil: Pencil, m: int, cfg: SolverConfig | None = None):
    """``(sigma_min(B^m), converged)`` computed without forming ``B^m``."""
    r = smallest_singular_pencil(pencil.A, pencil.M, pencil.lam, m, cfg, ops=_ops(pencil))
    return float(r.gamma), bool(r.converged)


def _angles(n_angles):
    if n_angles < 8:
        raise InvalidArgumentError("n_angles must be >= 8")
    return 2 * np.pi * np.arange(n_angles) / n_angles


def _support_from_interval(zmin, zmax, lam, thetas):
    # numerical range of a Hermitian pencil is the segment [zmin, zmax]
    rot = np.exp(1j * thetas)
    mu = np.minimum((rot * (zmin - lam)).real, (rot * (zmax - lam)).real)
    return mu


def numrange_distance(pencil: Pencil, n_angles: int = 64, cfg: SolverConfig | None = None) -> float:
    """Lower bound for ``dist(lam, W_M(A))`` from a support-function sweep.

    ``max_theta max(0, lambda_min(Herm(e^{i theta} B)))`` over a uniform
    grid of ``n_angles`` directions. Refining the grid by doubling can only
    increase the value.
    """
    thetas = _angles(n_angles)
    lam = pencil.lam
    if pencil.n <= DENSE_LIMIT:
        B = symmetrized_dense(pencil.A, pencil.M, lam)
        best = 0.0
        for t in thetas:
            R = np.exp(1j * t) * B
            H = 0.5 * (R + R.conj().T)
            mu = sla.eigvalsh(H, subset_by_index=[0, 0])[0]
            best = max(best, float(mu))
        return best
    cfg = cfg or SolverConfig()
    chol = cholesky_spd(pencil.M)
    if pencil.is_hermitian:
        zmin = pencil_extreme_eig(pencil.A, pencil.M, "smallest", cfg, chol)
        zmax = pencil_extreme_eig(pencil.A, pencil.M, "largest", cfg, chol)
        mu = _support_from_interval(zmin, zmax, lam, thetas)
        return float(max(0.0, mu.max()))
    S = _ops(pencil).S.tocsr()
    best = 0.0
    for t in thetas:
        R = np.exp(1j * t) * S
        H = 0.5 * (R + R.conj().T)
        best = max(best, pencil_extreme_eig(H, pencil.M, "smallest", cfg, chol))
    return best


def spectral_gap(pencil: Pencil, cfg: SolverConfig | None = None) -> float | None:
    """``min |zeta - lam|`` over pencil eigenvalues, or ``None`` if A is not Hermitian.

    Shift-invert about ``Re(lam)``; the eigenvalue nearest the shift gives
    the distance together with ``Im(lam)``.
    """
    if not pencil.is_hermitian:
        return None
    cfg = cfg or SolverConfig()
    lam = pencil.lam
    ops = _ops(pencil) if lam.imag == 0 else PencilOperators(pencil.A, pencil.M, lam.real)
    if ops.lu is None:
        return abs(lam.imag)
    lu, M = ops.lu, pencil.M
    n = pencil.n
    r = lanczos(lambda x: lu.solve(np.asarray(M @ x)), n, weight=lambda x: M @ x,
                which="magnitude", tol=cfg.tol, max_iter=cfg.iter_cap(n),
                dtype=np.result_type(ops.S.dtype, np.float64), v0=cfg.start(n))
    d = 1.0 / abs(float(r.values[0]))
    return float(np.hypot(d, lam.imag))


def condition_number(pencil: Pencil, cfg: SolverConfig | None = None) -> float:
    """``sigma_max(B) / sigma_min(B)``."""
    lo = gamma_h(pencil, cfg)
    if pencil.n <= DENSE_LIMIT:
        hi = float(sla.svdvals(symmetrized_dense(pencil.A, pencil.M, pencil.lam))[0])
    else:
        hi = largest_singular_pencil(pencil.A, pencil.M, pencil.lam, cfg, ops=_ops(pencil)).gamma
    return hi / lo if lo > 0 else np.inf


def pseudo_radius(pencil: Pencil, eps: float, n_rays: int = 64, cfg: SolverConfig | None = None,
                  n_samples: int = 48) -> float:
    """Largest ``|z - lam|`` with ``sigma_min(L^{-1}(A - zM)L^{-*}) <= eps``.

    Along each of ``n_rays`` rays from ``lam`` the resolvent norm is sampled
    on a geometric radius grid reaching past ``||B|| + eps`` (beyond which
    no point qualifies); the outermost crossing is then located by bisection.
    When the Schur factor is diagonal to within ``1e-6 eps`` the set is a
    union of disks and each ray is solved in closed form instead.
    """
    if not eps > 0:
        raise InvalidArgumentError("pseudo_eps must be positive")
    if n_rays < 1:
        raise InvalidArgumentError("n_rays must be >= 1")
    if pencil.n <= DENSE_LIMIT:
        B = symmetrized_dense(pencil.A, pencil.M, pencil.lam)
        # unitary invariance: work with the triangular Schur factor
        T, _ = sla.schur(B.astype(complex), output="complex")
        if np.linalg.norm(np.triu(T, 1)) <= 1e-6 * eps:
            # normal to within 1e-6 eps (Weyl): the set is a union of eps-disks
            return _normal_pseudo_radius(T.diagonal(), eps, n_rays)
        eye = np.eye(len(T))
        bnorm = float(sla.svdvals(T)[0])
        if len(T) <= PSEUDO_SVD_LIMIT:
            def smin(w):
                return float(sla.svdvals(T - w * eye)[-1])
        else:
            tol = (cfg or SolverConfig()).tol

            def smin(w):
                return _triangular_smin(T, w, tol)
    else:
        cfg = cfg or SolverConfig()
        bnorm = largest_singular_pencil(pencil.A, pencil.M, pencil.lam, cfg, ops=_ops(pencil)).gamma

        def smin(w):
            return smallest_singular_pencil(pencil.A, pencil.M, pencil.lam + w, 1, cfg).gamma

    rmax = (bnorm + eps) * (1 + 1e-9)
    radii = np.unique(np.concatenate([[0.0], rmax * np.geomspace(1e-6, 1.0, n_samples),
                                      np.linspace(0.0, rmax, n_samples + 1)]))
    best = 0.0
    for k in range(n_rays):
        d = np.exp(2j * np.pi * k / n_rays)
        r_in = _outermost_inside(lambda r: smin(r * d), radii, eps)
        if r_in is not None:
            best = max(best, r_in)
    return float(best)


def _normal_pseudo_radius(mu, eps, n_rays):
    """Outermost ``r`` on each ray with ``min_i |mu_i - r d| <= eps``, maximized."""
    d = np.exp(2j * np.pi * np.arange(n_rays) / n_rays)
    p = (mu[None, :] * d.conj()[:, None]).real
    q2 = np.abs(mu[None, :]) ** 2 - p ** 2
    with np.errstate(invalid="ignore"):
        r = np.where(q2 <= eps ** 2, p + np.sqrt(np.maximum(eps ** 2 - q2, 0.0)), -np.inf)
    r = r.max()
    return float(r) if r >= 0 else 0.0


def _triangular_smin(T, w, tol):
    """``sigma_min(T - w I)`` for upper-triangular ``T`` by inverse Lanczos.

    Each step costs two triangular solves, so a sample is O(n^2) instead of
    the O(n^3) of a dense SVD, which remains the fallback when the iteration
    cap is hit.
    """
    R = T - w * np.eye(len(T))
    if np.min(np.abs(np.diag(R))) == 0.0:
        return 0.0

    def op(x):
        y = sla.solve_triangular(R, x, trans="C")
        return sla.solve_triangular(R, y)

    with np.errstate(over="ignore", invalid="ignore"):
        res = lanczos(op, len(T), which="largest", tol=tol, dtype=complex,
                      max_iter=min(len(T), TRI_LANCZOS_MAX_ITER))
    if not res.converged:
        # clustered small singular values: a dense SVD is cheaper than more steps
        return float(sla.svdvals(R)[-1])
    top = float(res.values[0])
    return 1.0 / np.sqrt(top) if np.isfinite(top) and top > 0 else 0.0


def _outermost_inside(f, radii, eps):
    """Largest ``r`` in ``[0, radii[-1]]`` with ``f(r) <= eps``, or ``None``.

    Sampled local minima are refined (golden section), outermost first, so
    narrow dips between samples are not missed; the outer crossing is then
    bisected. ``f`` is 1-Lipschitz, so a bracket whose Lipschitz lower bound
    exceeds ``eps``, or that lies inside a known crossing, is skipped.
    """
    vals = np.array([f(r) for r in radii])
    pts = list(zip(radii, vals))
    last = len(radii) - 1
    hits = np.flatnonzero(vals <= eps)
    r_hit = radii[hits[-1]] if hits.size else -np.inf
    for i in range(last, -1, -1):
        left, right = max(i - 1, 0), min(i + 1, last)
        if radii[right] <= r_hit:
            break
        if not (vals[i] > eps and vals[i] <= vals[left] and vals[i] <= vals[right]):
            continue
        lower = 0.5 * (vals[left] + vals[right] - (radii[right] - radii[left]))
        if lower > eps:
            continue
        res = minimize_scalar(f, bounds=(radii[left], radii[right]), method="bounded",
                              options={"xatol": 1e-12 * max(radii[right], 1.0)})
        pts.append((float(res.x), float(res.fun)))
        if res.fun <= eps:
            r_hit = max(r_hit, float(res.x))
    pts.sort()
    r_all = np.array([p[0] for p in pts])
    v_all = np.array([p[1] for p in pts])
    inside = np.flatnonzero(v_all <= eps)
    if inside.size == 0:
        return None
    i = inside[-1]
    if i == len(r_all) - 1:
        return float(r_all[-1])
    lo, hi = r_all[i], r_all[i + 1]
    while hi - lo > 1e-12 * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        if f(mid) <= eps:
            lo = mid
        else:
            hi = mid
    return float(lo)


def indicators(pencil: Pencil, pseudo_eps: float = 1e-3, cfg: SolverConfig | None = None,
               n_angles: int = 64, n_rays: int = 64, powers=(1,)) -> DiagnosticsReport:
    """Fill a full DiagnosticsReport for ``pencil``."""
    if not pseudo_eps > 0:
        raise InvalidArgumentError("pseudo_eps must be positive")
    cfg = cfg or SolverConfig()
    prov = {}
    res = smallest_singular_pencil(pencil.A, pencil.M, pencil.lam, 1, cfg, ops=_ops(pencil))
    prov["gamma_h"] = {"iterations": res.iterations, "residual": res.residual,
                       "converged": res.converged, "method": res.method}
    g = float(res.gamma)
    pw = []
    for m in powers:
        r = smallest_singular_pencil(pencil.A, pencil.M, pencil.lam, m, cfg, ops=_ops(pencil))
        pw.append((int(m), float(r.gamma), bool(r.converged)))
        prov[f"gamma_power_{m}"] = {"iterations": r.iterations, "residual": r.residual}
    nr = numrange_distance(pencil, n_angles, cfg)
    gap = spectral_gap(pencil, cfg)
    cond = condition_number(pencil, cfg)
    rad = pseudo_radius(pencil, pseudo_eps, n_rays, cfg)
    return DiagnosticsReport(g, nr, gap, cond, (pseudo_eps, rad), pw, prov,
                             n=pencil.n, lam=pencil.lam, h=pencil.h)


# ---------------------------------------------------------------------------
# Local gamma on element patches
# ---------------------------------------------------------------------------

@dataclass
class LocalGammaField:
    """Per-element ``gamma_h(K)`` and the DOF patch each value was computed on."""

    values: np.ndarray
    patches: list

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def min(self) -> float:
        v = self.values[self.finite]
        return float(v.min()) if v.size else np.inf

    @property
    def max(self) -> float:
        v = self.values[self.finite]
        return float(v.max()) if v.size else np.inf

    def argmin(self) -> int:
        v = np.where(self.finite, self.values, np.inf)
        return int(np.argmin(v))


def _elements(mesh):
    if isinstance(mesh, TriMesh):
        return mesh.triangles, mesh.n_vertices
    if isinstance(mesh, Mesh1D):
        return mesh.cells, mesh.nodes.size
    raise InvalidArgumentError("expected a TriMesh or Mesh1D")


def element_patches(mesh, dof_map) -> list:
    """Interior DOFs on each element and on every element sharing a vertex with it."""
    elems, nv = _elements(mesh)
    ne = len(elems)
    inc = sp.csr_matrix((np.ones(elems.size), (np.repeat(np.arange(ne), elems.shape[1]),
                                                elems.ravel())), shape=(ne, nv))
    ring = (inc @ inc.T @ inc).tocsr()
    ring.sort_indices()
    patches = []
    for e in range(ne):
        verts = ring.indices[ring.indptr[e]:ring.indptr[e + 1]]
        d = dof_map[verts]
        patches.append(np.sort(d[d >= 0]))
    return patches


def _infer_dof_map(mesh, n):
    if isinstance(mesh, TriMesh):
        return mesh.dof_map()
    N = mesh.n_cells
    dof = np.arange(-1, N, dtype=np.int64)
    if n == N - 1:
        dof[-1] = -1
    elif n != N:
        raise InvalidArgumentError("matrix size does not match the 1D mesh")
    return dof


def patch_gamma(A_K, M_K, lam) -> float:
    """Dense ``sigma_min(M_K^{-1/2}(A_K - lam M_K)M_K^{-1/2})``."""
    L = sla.cholesky(M_K, lower=True)
    lam = complex(lam)
    S = A_K - (lam.real if lam.imag == 0 else lam) * M_K
    X = sla.solve_triangular(L, S, lower=True)
    B = sla.solve_triangular(L, X.conj().T, lower=True).conj().T
    return float(sla.svdvals(B)[-1])


def local_gamma(mesh, A, M, lam, dof_map=None) -> LocalGammaField:
    """Local reduced minimum modulus on vertex-adjacency patches.

    Elements whose patch holds no interior DOF get ``+inf``.
    """
    A = sp.csr_matrix(A)
    M = sp.csr_matrix(M)
    if dof_map is None:
        dof_map = _infer_dof_map(mesh, A.shape[0])
    patches = element_patches(mesh, np.asarray(dof_map))
    vals = np.full(len(patches), np.inf)
    cache = {}
    for e, idx in enumerate(patches):
        if idx.size == 0:
            continue
        key = idx.tobytes()
        if key not in cache:
            cache[key] = patch_gamma(A[idx][:, idx].toarray(), M[idx][:, idx].toarray(), lam)
        vals[e] = cache[key]
    return LocalGammaField(vals, patches)


def local_gamma_pencil(pencil: Pencil) -> LocalGammaField:
    if pencil.mesh is None:
        raise InvalidArgumentError("pencil carries no mesh")
    return local_gamma(pencil.mesh, pencil.A, pencil.M, pencil.lam, pencil.dof_map)


def hermitian_eigs(pencil: Pencil, k: int, cfg: SolverConfig | None = None):
    """The ``k`` pencil eigenvalues nearest zero (smallest for positive definite A)."""
    return generalized_eigs_smallest(pencil.A, pencil.M, k, cfg).values
