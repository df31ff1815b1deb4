"""Numeric kernels: Cholesky of the mass matrix, pencil singular values,
generalized Hermitian eigenvalues and numerical rank.

The iterative routines never form ``M^{-1/2}`` or matrix powers. For a
pencil ``S = A - lam M`` with ``B = L^{-1} S L^{-*}`` the identity

    sigma_max(B^{-m})^2 = lambda_max(Y),   Y = (S^{-1} M)^m (S^{-*} M)^m

holds, and ``Y`` is self-adjoint and positive semidefinite in the
``M``-inner product. So ``sigma_min(B^m)`` needs only a sparse LU of ``S``
and products with ``M``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from gammah import kernels
from gammah.errors import InvalidArgumentError, NotPositiveDefiniteError

DENSE_LIMIT = 2000
_GOLDEN = 0.6180339887498949


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls shared by the Krylov solvers.

    ``max_iter=None`` means ``10 * n``. ``start_vector`` names a rule of
    ``start_vector()``; further deterministic vectors are used on breakdown.
    """

    tol: float = 1e-10
    max_iter: int | None = None
    start_vector: str = "perturbed-ones"

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidArgumentError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be >= 1")
        if self.start_vector not in ("ones", "perturbed-ones"):
            raise InvalidArgumentError(f"unknown start vector rule {self.start_vector!r}")

    def start(self, n, dtype=np.float64):
        return start_vector(n, self.start_vector, dtype)

    def iter_cap(self, n: int) -> int:
        return self.max_iter if self.max_iter is not None else 10 * n


# ---------------------------------------------------------------------------
# Cholesky of M
# ---------------------------------------------------------------------------

def envelope_arrays(M):
    """Row envelope of the lower triangle of symmetric ``M``: ``(first, ptr, env)``.

    Row ``i`` stores columns ``first[i]..i`` in ``env[ptr[i]:ptr[i+1]]``.
    """
    M = sp.csr_matrix(M)
    M.sort_indices()
    n = M.shape[0]
    lower = sp.tril(M, format="csr")
    first = np.arange(n, dtype=np.int64)
    rows_nz = np.diff(lower.indptr) > 0
    first[rows_nz] = lower.indices[lower.indptr[:-1][rows_nz]]
    lengths = np.arange(n) - first + 1
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(lengths, out=ptr[1:])
    env = np.zeros(int(ptr[-1]))
    r = np.repeat(np.arange(n), np.diff(lower.indptr))
    env[ptr[r] + lower.indices - first[r]] = lower.data
    return first, ptr, env


class CholeskyFactor:
    """``M = L L*`` with ``L`` lower triangular after a symmetric reordering.

    The factor is stored in envelope form for ``M[perm][:, perm]``; ``L``
    in the original numbering is ``P^T L_p P`` which still satisfies
    ``L L* = M``. Complex Hermitian input uses a dense factor.
    """

    def __init__(self, M, reorder=True):
        M = sp.csr_matrix(M)
        n = M.shape[0]
        self.n = n
        self._dense = None
        if np.iscomplexobj(M.data) and np.any(M.data.imag != 0):
            if n > DENSE_LIMIT:
                raise InvalidArgumentError("complex mass matrices are limited to n <= 2000")
            try:
                self._dense = sla.cholesky(M.toarray(), lower=True)
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefiniteError(f"M is not positive definite: {exc}") from None
            self.perm = np.arange(n)
            return
        M = sp.csr_matrix(M.real)
        perm = reverse_cuthill_mckee(M, symmetric_mode=True).astype(np.int64) if reorder \
            else np.arange(n, dtype=np.int64)
        first, ptr, env = envelope_arrays(M[perm][:, perm])
        bad = kernels.envelope_cholesky(first, ptr, env)
        if bad >= 0:
            raise NotPositiveDefiniteError(
                f"non-positive pivot at row {int(perm[bad])}", pivot=int(perm[bad]))
        self.perm = perm
        self._iperm = np.argsort(perm)
        self._first, self._ptr, self._env = first, ptr, env

    @property
    def dimension(self) -> int:
        return self.n

    def _as_block(self, b):
        b = np.asarray(b)
        return b.reshape(self.n, -1), b.shape

    def _apply(self, b, solver):
        block, shape = self._as_block(b)
        parts = [block.real, block.imag] if np.iscomplexobj(block) else [block]
        out = []
        for part in parts:
            x = np.ascontiguousarray(part[self.perm], dtype=np.float64)
            solver(self._first, self._ptr, self._env, x)
            out.append(x[self._iperm])
        res = out[0] if len(out) == 1 else out[0] + 1j * out[1]
        return res.reshape(shape)

    def solve_lower(self, b):
        """``L^{-1} b``."""
        if self._dense is not None:
            return sla.solve_triangular(self._dense, b, lower=True)
        return self._apply(b, kernels.envelope_solve_lower)

    def solve_upper(self, b):
        """``L^{-*} b``."""
        if self._dense is not None:
            return sla.solve_triangular(self._dense, b, lower=True, trans="C")
        return self._apply(b, kernels.envelope_solve_upper)

    def solve(self, b):
        """``M^{-1} b``."""
        return self.solve_upper(self.solve_lower(b))

    def lower_dense(self) -> np.ndarray:
        """Dense ``L`` in the original numbering (``L @ L.conj().T == M``)."""
        if self._dense is not None:
            return self._dense.copy()
        n = self.n
        Lp = np.zeros((n, n))
        r = np.repeat(np.arange(n), np.diff(self._ptr))
        c = np.arange(self._ptr[-1]) - self._ptr[r] + self._first[r]
        Lp[r, c] = self._env
        return Lp[np.ix_(self._iperm, self._iperm)]


def cholesky_spd(M, reorder: bool = True) -> CholeskyFactor:
    """Envelope Cholesky of a sparse Hermitian positive definite matrix."""
    M = sp.csr_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise InvalidArgumentError("M must be square")
    d = (M - M.conj().T)
    scale = max(1.0, float(abs(M).max()) if M.nnz else 1.0)
    if d.nnz and float(abs(d).max()) > 1e-12 * scale:
        raise InvalidArgumentError("M is not Hermitian")
    return CholeskyFactor(M, reorder=reorder)


# ---------------------------------------------------------------------------
# Lanczos in a weighted inner product
# ---------------------------------------------------------------------------

class LanczosResult(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: bool
    extent: float = 0.0


def _perturbed_start(n, k, dtype):
    i = np.arange(1, n + 1)
    return (1.0 + 0.5 * np.sin(i * _GOLDEN * (k + 1) * np.pi)).astype(dtype)


def start_vector(n, rule="perturbed-ones", dtype=np.float64):
    """Deterministic Lanczos start vector.

    ``"ones"`` is the plain all-ones vector. It is orthogonal to every mode
    that is odd under a mirror symmetry of the mesh, so on symmetric
    problems it can silently miss the target; ``"perturbed-ones"`` adds a
    fixed aperiodic ripple that breaks all such symmetries.
    """
    if rule == "ones":
        return np.full(n, 1.0 / np.sqrt(n), dtype=dtype)
    if rule == "perturbed-ones":
        v = _perturbed_start(n, 0, dtype)
        return v / np.linalg.norm(v)
    raise InvalidArgumentError(f"unknown start vector rule {rule!r}")


def lanczos(op, n, *, weight=None, which="largest", k=1, tol=1e-10, max_iter=None,
            v0=None, dtype=np.float64):
    """Extreme eigenpairs of an operator self-adjoint in ``<x, y> = y* W x``.

    ``op`` maps a vector to a vector and ``weight`` applies ``W`` (identity
    if ``None``). ``which`` is ``"largest"``, ``"smallest"`` or
    ``"magnitude"``. Uses full reorthogonalization, with explicit restarts
    when the basis would exceed the memory cap. On breakdown (an exactly
    invariant Krylov subspace) the basis is extended with a deterministic
    perturbed vector until the space is exhausted or the target converges.
    """
    W = weight if weight is not None else (lambda x: x)
    max_iter = 10 * n if max_iter is None else max_iter
    itemsize = 16 if np.dtype(dtype).kind == "c" else 8
    cap = int(min(n, max(40, 1.0e9 // (2 * itemsize * max(n, 1)))))
    v = start_vector(n, "perturbed-ones", dtype) if v0 is None else np.asarray(v0, dtype=dtype)
    tiny = np.finfo(float).tiny
    total = 0
    n_extra = 0
    while True:
        V = np.zeros((cap, n), dtype=dtype)
        WV = np.zeros((cap, n), dtype=dtype)
        alpha = np.zeros(cap)
        beta = np.zeros(cap)
        Wv = W(v)
        nv = np.sqrt(abs(np.vdot(Wv, v).real))
        V[0], WV[0] = v / nv, Wv / nv
        j = 0
        while True:
            w = np.asarray(op(V[j]))
            if np.result_type(w, V) != V.dtype:
                V = V.astype(np.result_type(w, V))
                WV = WV.astype(V.dtype)
            total += 1
            alpha[j] = np.vdot(WV[j], w).real
            for _ in range(2):
                w = w - (WV[:j + 1].conj() @ w) @ V[:j + 1]
            Ww = W(w)
            b = np.sqrt(abs(np.vdot(Ww, w).real))
            if j > 0:
                theta, s = sla.eigh_tridiagonal(alpha[:j + 1], beta[:j])
            else:
                theta, s = alpha[:1].copy(), np.ones((1, 1))
            idx = _select(theta, which, k)
            dim = j + 1
            exhausted = dim >= n
            res = np.zeros(len(idx)) if exhausted else b * np.abs(s[-1, idx])
            conv = len(idx) == min(k, n) and bool(
                np.all(res <= tol * np.maximum(np.abs(theta[idx]), tiny)))
            broke = b <= 1e-12 * max(np.abs(theta).max(), tiny)
            if exhausted or conv:
                break
            if total >= max_iter or dim == cap:
                break
            if broke:
                n_extra += 1
                w = _perturbed_start(n, n_extra, V.dtype)
                w0 = np.sqrt(abs(np.vdot(W(w), w).real))
                for _ in range(2):
                    w = w - (WV[:dim].conj() @ w) @ V[:dim]
                Ww = W(w)
                b = np.sqrt(abs(np.vdot(Ww, w).real))
                if b <= 1e-10 * w0:
                    conv = True
                    break
                beta[j] = 0.0
            else:
                beta[j] = b
            V[j + 1], WV[j + 1] = w / b, Ww / b
            j += 1
        vecs = V[:dim].T @ s[:, idx]
        if conv or exhausted or total >= max_iter:
            return LanczosResult(theta[idx], vecs, res, total, bool(conv or exhausted),
                                 float(np.abs(theta).max()))
        # explicit restart from the wanted Ritz vectors
        v = vecs.sum(axis=1)


def _select(theta, which, k):
    k = min(k, len(theta))
    if which == "largest":
        return np.argsort(theta)[::-1][:k]
    if which == "smallest":
        return np.argsort(theta)[:k]
    if which == "magnitude":
        return np.argsort(-np.abs(theta), kind="stable")[:k]
    raise InvalidArgumentError(f"unknown selection {which!r}")


# ---------------------------------------------------------------------------
# Pencil operators
# ---------------------------------------------------------------------------

class PencilOperators:
    """Lazily factorized pieces of ``S = A - lam M`` shared across calls."""

    def __init__(self, A, M, lam):
        self.A = sp.csr_matrix(A)
        self.M = sp.csr_matrix(M)
        self.lam = complex(lam)
        lam_c = self.lam.real if self.lam.imag == 0 else self.lam
        self.S = (self.A - lam_c * self.M).tocsc()
        self.n = self.A.shape[0]
        self._lu = None
        self._lu_failed = False
        self._chol = None

    @property
    def dtype(self):
        return np.result_type(self.S.dtype, self.M.dtype, np.float64)

    @property
    def lu(self):
        """Sparse LU of ``S`` or ``None`` if ``S`` is exactly singular."""
        if self._lu is None and not self._lu_failed:
            try:
                with np.errstate(all="ignore"):
                    lu = spla.splu(self.S, permc_spec="MMD_AT_PLUS_A")
                d = np.abs(lu.U.diagonal())
                if not np.all(np.isfinite(d)) or d.min() == 0.0:
                    raise RuntimeError("Factor is exactly singular")
                self._lu = lu
            except RuntimeError:
                self._lu_failed = True
        return self._lu

    @property
    def chol(self) -> CholeskyFactor:
        if self._chol is None:
            self._chol = cholesky_spd(self.M)
        return self._chol

    def mass(self, x):
        return self.M @ x

    def inv_power_op(self, m):
        """``x -> (S^{-1} M)^m (S^{-*} M)^m x``."""
        lu = self.lu

        def op(x):
            for _ in range(m):
                x = lu.solve(np.asarray(self.M @ x), trans="H")
            for _ in range(m):
                x = lu.solve(np.asarray(self.M @ x))
            return x
        return op

    def fwd_power_op(self, m):
        """``x -> (M^{-1} S^*)^m (M^{-1} S)^m x``."""
        SH = self.S.conj().T.tocsr()
        S = self.S.tocsr()
        chol = self.chol

        def op(x):
            for _ in range(m):
                x = chol.solve(S @ x)
            for _ in range(m):
                x = chol.solve(SH @ x)
            return x
        return op


class SingularResult(NamedTuple):
    gamma: float
    iterations: int
    residual: float
    converged: bool
    method: str


def smallest_singular_pencil(A, M, lam, m: int = 1, cfg: SolverConfig | None = None, *,
                             ops: PencilOperators | None = None) -> SingularResult:
    """``sigma_min(B^m)`` for ``B = L^{-1}(A - lam M)L^{-*}`` without forming ``B^m``.

    Runs Lanczos on ``Y = (S^{-1}M)^m (S^{-*}M)^m`` for its largest
    eigenvalue ``1 / sigma_min^2``. If ``S`` is exactly singular the
    forward operator ``(M^{-1}S^*)^m (M^{-1}S)^m`` is used for its smallest
    eigenvalue instead. Non-convergence is reported, not raised.
    """
    if int(m) != m or m < 1:
        raise InvalidArgumentError("m must be an integer >= 1")
    cfg = cfg or SolverConfig()
    ops = ops or PencilOperators(A, M, lam)
    n = ops.n
    dtype = ops.dtype
    if ops.lu is not None:
        r = lanczos(ops.inv_power_op(int(m)), n, weight=ops.mass, which="largest",
                    tol=cfg.tol, max_iter=cfg.iter_cap(n), dtype=dtype,
                    v0=cfg.start(n, dtype))
        theta = float(r.values[0])
        gamma = 1.0 / np.sqrt(theta) if theta > 0 else np.inf
        rel = float(r.residuals[0] / theta) if theta > 0 else np.inf
        return SingularResult(gamma, r.iterations, rel, r.converged, "inverse")
    r = lanczos(ops.fwd_power_op(int(m)), n, weight=ops.mass, which="smallest",
                tol=cfg.tol, max_iter=cfg.iter_cap(n), dtype=dtype,
                    v0=cfg.start(n, dtype))
    theta = float(r.values[0])
    # eigenvalues of X below rounding level of its spectrum are zero
    floor = 1e3 * np.finfo(float).eps * r.extent
    gamma = float(np.sqrt(theta)) if theta > floor else 0.0
    return SingularResult(gamma, r.iterations, float(r.residuals[0] / max(r.extent, 1e-300)),
                          r.converged, "forward")


def largest_singular_pencil(A, M, lam, cfg: SolverConfig | None = None, *,
                            ops: PencilOperators | None = None) -> SingularResult:
    """``sigma_max(B)`` via Lanczos on ``M^{-1}S^* M^{-1}S``."""
    cfg = cfg or SolverConfig()
    ops = ops or PencilOperators(A, M, lam)
    r = lanczos(ops.fwd_power_op(1), ops.n, weight=ops.mass, which="largest",
                tol=cfg.tol, max_iter=cfg.iter_cap(ops.n), dtype=ops.dtype,
                v0=cfg.start(ops.n, ops.dtype))
    theta = float(r.values[0])
    return SingularResult(float(np.sqrt(max(theta, 0.0))), r.iterations,
                          float(r.residuals[0] / max(theta, np.finfo(float).tiny)),
                          r.converged, "forward")


# ---------------------------------------------------------------------------
# Dense oracles
# ---------------------------------------------------------------------------

def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A)


def dense_svd_oracle(A) -> np.ndarray:
    """All singular values, descending, by a dense method (n <= 2000).

    Complex input goes through the real embedding ``[[Re, -Im], [Im, Re]]``
    whose singular values are those of ``A`` with doubled multiplicity.
    """
    A = _dense(A)
    if A.ndim != 2 or max(A.shape) > DENSE_LIMIT:
        raise InvalidArgumentError(f"dense oracle limited to n <= {DENSE_LIMIT}")
    if A.size == 0:
        return np.zeros(0)
    if np.iscomplexobj(A):
        R = np.block([[A.real, -A.imag], [A.imag, A.real]])
        s = sla.svdvals(R)
        return s[::2].copy()
    return sla.svdvals(A.astype(np.float64))


def symmetrized_dense(A, M, lam) -> np.ndarray:
    """Dense ``L^{-1}(A - lam M)L^{-*}`` with ``L`` the Cholesky factor of ``M``."""
    A, M = _dense(A), _dense(M)
    if max(A.shape) > DENSE_LIMIT:
        raise InvalidArgumentError(f"dense path limited to n <= {DENSE_LIMIT}")
    L = sla.cholesky(M, lower=True)
    lam = complex(lam)
    S = A - (lam.real if lam.imag == 0 else lam) * M
    X = sla.solve_triangular(L, S, lower=True)
    return sla.solve_triangular(L, X.conj().T, lower=True).conj().T


# ---------------------------------------------------------------------------
# Generalized Hermitian eigenvalues
# ---------------------------------------------------------------------------

class EigResult(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: bool


def generalized_eigs_smallest(K, M, k: int = 1, cfg: SolverConfig | None = None,
                              shift: float = 0.0) -> EigResult:
    """The ``k`` eigenvalues of ``K u = zeta M u`` nearest ``shift``, ascending.

    With the default ``shift = 0`` and ``K`` positive definite these are the
    ``k`` smallest. Shift-invert Lanczos on ``(K - shift M)^{-1} M`` in the
    ``M``-inner product. ``residuals`` holds ``||K u - zeta M u||_{M^{-1}}``
    for ``M``-normalized ``u``; converged means each is at most
    ``tol * max(1, |zeta|)``.
    """
    K = sp.csr_matrix(K)
    M = sp.csr_matrix(M)
    n = K.shape[0]
    if not 1 <= k <= n:
        raise InvalidArgumentError("need 1 <= k <= n")
    scale = max(1.0, float(abs(K).max()) if K.nnz else 1.0)
    asym = K - K.conj().T
    if asym.nnz and float(abs(asym).max()) > 1e-10 * scale:
        raise InvalidArgumentError("K is not Hermitian")
    cfg = cfg or SolverConfig()
    ops = PencilOperators(K, M, shift)
    if ops.lu is None:
        raise InvalidArgumentError("shift is an exact eigenvalue; choose another shift")
    lu = ops.lu
    r = lanczos(lambda x: lu.solve(np.asarray(M @ x)), n, weight=lambda x: M @ x,
                which="magnitude", k=k, tol=cfg.tol, max_iter=cfg.iter_cap(n),
                dtype=ops.dtype, v0=cfg.start(n, ops.dtype))
    zeta = shift + 1.0 / r.values
    U = r.vectors
    chol = ops.chol

    def residuals(U, zeta):
        R = K @ U - (M @ U) * zeta
        return np.sqrt(np.abs(np.einsum("ij,ij->j", R.conj(), chol.solve(R))))

    res = residuals(U, zeta)
    # The Lanczos test bounds the residual of the inverted problem; mapped
    # back it grows with ||K||, so polish by block inverse iteration.
    iters = r.iterations
    for _ in range(50):
        if np.all(res <= cfg.tol * np.maximum(1.0, np.abs(zeta))):
            break
        Z = np.asarray(lu.solve(np.asarray(M @ U)))
        Z = Z.reshape(n, -1)
        Kz, Mz = Z.conj().T @ (K @ Z), Z.conj().T @ (M @ Z)
        w, Y = sla.eigh(0.5 * (Kz + Kz.conj().T), 0.5 * (Mz + Mz.conj().T))
        zeta, U = w, Z @ Y
        res = residuals(U, zeta)
        iters += k
    order = np.argsort(zeta)
    zeta, U, res = zeta[order], U[:, order], res[order]
    ok = bool(np.all(res <= cfg.tol * np.maximum(1.0, np.abs(zeta))))
    return EigResult(zeta, U, res, iters, ok)


def pencil_extreme_eig(H, M, which: str = "smallest", cfg: SolverConfig | None = None,
                       chol: CholeskyFactor | None = None) -> float:
    """Extreme eigenvalue of the Hermitian pencil ``(H, M)``.

    Dense for n <= 2000, otherwise plain Lanczos on ``M^{-1} H``.
    """
    n = H.shape[0]
    if n <= DENSE_LIMIT:
        idx = [0, 0] if which == "smallest" else [n - 1, n - 1]
        w = sla.eigh(_dense(H), _dense(M), eigvals_only=True, subset_by_index=idx)
        return float(w[0])
    cfg = cfg or SolverConfig()
    chol = chol or cholesky_spd(M)
    H = sp.csr_matrix(H)
    dtype = np.result_type(H.dtype, np.float64)
    r = lanczos(lambda x: chol.solve(H @ x), n, weight=lambda x: M @ x, which=which,
                tol=cfg.tol, max_iter=cfg.iter_cap(n), dtype=dtype,
                    v0=cfg.start(n, dtype))
    return float(r.values[0])


# ---------------------------------------------------------------------------
# Numerical rank
# ---------------------------------------------------------------------------

class RankResult(NamedTuple):
    rank: int
    gap_ratio: float


def default_rank_tol(n: int) -> float:
    return n * np.finfo(float).eps * 1e3


def numerical_rank(A, tol_rule: float | None = None) -> RankResult:
    """Count singular values above ``tol_rule * sigma_max``.

    ``gap_ratio = sigma_r / sigma_{r+1}`` is infinite when the next singular
    value is exactly zero or absent.
    """
    A = _dense(A)
    if A.size == 0:
        raise InvalidArgumentError("empty matrix")
    s = dense_svd_oracle(A)
    tol = default_rank_tol(max(A.shape)) if tol_rule is None else tol_rule
    if s[0] == 0:
        return RankResult(0, np.inf)
    r = int(np.count_nonzero(s > tol * s[0]))
    if r == len(s) or s[r] == 0:
        return RankResult(r, np.inf)
    if r == 0:
        return RankResult(0, np.inf)
    return RankResult(r, float(s[r - 1] / s[r]))
