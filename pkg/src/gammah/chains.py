"""Kernel/range chains, ascent and descent, Kaashoek-Taylor tests and subspace gaps.

Dense only (n <= 2000): every decision here is rank revealing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from gammah.errors import InvalidArgumentError
from gammah.linalg import DENSE_LIMIT, default_rank_tol, numerical_rank
from gammah.util import csv_line

CSV_HEADER = "m,ker_dim,range_rank,kt_intersection,kt_sum"
GAP_RATIO_MIN = 10.0


def _dense_square(S):
    S = S.toarray() if sp.issparse(S) else np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidArgumentError("expected a square matrix")
    if S.shape[0] > DENSE_LIMIT:
        raise InvalidArgumentError(f"chain analysis limited to n <= {DENSE_LIMIT}")
    if S.size == 0:
        raise InvalidArgumentError("empty matrix")
    return S


def normalized_powers(S, m_max, tol=None):
    """``[S^0, ..., S^m_max]`` each scaled to unit spectral norm, plus bookkeeping.

    Scaling is applied before every multiply, so powers of badly scaled
    matrices neither overflow nor underflow. Renormalizing also magnifies
    rounding noise. To first order the error in the computed ``S^m`` is
    ``eps ||S|| sum_k ||S^(k-1)|| ||S^(m-k)||``, so each power carries that
    sum divided by ``||S^m||`` as an amplification factor ``amp[m]``. Rank
    decisions on ``P_m`` should use a threshold of ``tol * amp[m]``. A
    power whose noise floor reaches its own norm is set to exact zero, and
    so is every later power.

    Returns ``(powers, log10_norms, amp)``.
    """
    n = S.shape[0]
    tol = default_rank_tol(n) if tol is None else tol
    s_norm = np.linalg.norm(S, 2)
    P = np.eye(n, dtype=S.dtype)
    out, logs, amps = [P], [0.0], [0.0]
    for m in range(1, m_max + 1):
        if np.isfinite(logs[-1]):
            P = P @ S
            nrm = np.linalg.norm(P, 2) if P.any() else 0.0
        else:
            nrm = 0.0
        if nrm > 0:
            L = logs[-1] + np.log10(nrm)
            terms = [logs[k - 1] + logs[m - k] - L for k in range(1, m + 1)]
            amp = s_norm * float(np.sum(10.0 ** np.array(terms)))
        else:
            L, amp = -np.inf, np.inf
        if tol * amp >= 1.0:
            P = np.zeros_like(P)
            L, amp = -np.inf, np.inf
        else:
            P = P / nrm
        out.append(P)
        logs.append(L)
        amps.append(amp)
    return out, logs, amps


def _power_tol(tol, amp):
    return tol if amp == 0 else (np.inf if not np.isfinite(amp) else tol * amp)


@dataclass
class ChainReport:
    kernel_dims: list
    range_ranks: list
    ascent: int | None
    descent: int | None
    kt_intersection_trivial: list
    kt_sum_full: list
    rank_tol: float
    min_gap_ratio: float
    gap_ratios: list = field(default_factory=list)
    log10_scales: list = field(default_factory=list)

    @property
    def resolved(self) -> bool:
        return self.ascent is not None and self.descent is not None

    def csv_lines(self) -> list:
        rows = [CSV_HEADER]
        for m, (k, r) in enumerate(zip(self.kernel_dims, self.range_ranks)):
            rows.append(csv_line([m, k, r, self.kt_intersection_trivial[m],
                                  self.kt_sum_full[m]]))
        return rows


def _first_stable(seq):
    for m in range(len(seq) - 1):
        if seq[m] == seq[m + 1]:
            return m
    return None


def chain_report(S, m_max: int, rank_tol_rule: float | None = None,
                 angle_tol: float = 1e-6) -> ChainReport:
    """Kernel and range chains of ``S^m`` for ``m = 0..m_max``.

    Ascent and descent are the first ``m`` with ``dim ker S^m = dim ker S^{m+1}``
    (resp. equal ranks). They are ``None`` (unresolved) when the chain does
    not stabilize within ``m_max``, when a rank decision up to the first
    repetition has a gap ratio below 10, or when the kernel chain decreases
    before it repeats. ``min_gap_ratio`` covers those decisions only; ranks
    of later powers are still reported in the chain lists.
    """
    S = _dense_square(S)
    if int(m_max) != m_max or m_max < 1:
        raise InvalidArgumentError("m_max must be an integer >= 1")
    n = S.shape[0]
    tol = default_rank_tol(n) if rank_tol_rule is None else rank_tol_rule
    powers, logs, amps = normalized_powers(S, int(m_max), tol)
    ranks, ratios = [], []
    for P, amp in zip(powers, amps):
        if not P.any():
            ranks.append(0)
            ratios.append(np.inf)
            continue
        r = numerical_rank(P, _power_tol(tol, amp))
        ranks.append(r.rank)
        ratios.append(r.gap_ratio)
    kernels = [n - r for r in ranks]
    kt_int, kt_sum = [], []
    for m in range(int(m_max) + 1):
        a, b, _ = _kt_from_powers(S, powers[m], powers[1], _power_tol(tol, amps[m]),
                                  _power_tol(tol, amps[1]), tol, angle_tol)
        kt_int.append(a)
        kt_sum.append(b)
    # once ker S^m = ker S^(m+1) the chain is constant from there on, so
    # the verdict rests only on the powers up to the first repetition
    asc = _first_stable(kernels)
    desc = _first_stable(ranks)
    stop = len(kernels) if asc is None or desc is None else max(asc, desc) + 2
    used = slice(0, stop)
    min_ratio = float(min(ratios[used]))
    monotone = all(kernels[i] <= kernels[i + 1] for i in range(stop - 1))
    if not (monotone and min_ratio >= GAP_RATIO_MIN):
        asc = desc = None
    return ChainReport(kernels, ranks, asc, desc, kt_int, kt_sum, tol, min_ratio, ratios, logs)


def _range_kernel(P, tol):
    """Orthonormal bases of ``Ran P`` and ``ker P`` from one SVD."""
    n = P.shape[0]
    if not P.any():
        return np.zeros((n, 0), dtype=P.dtype), np.eye(n, dtype=P.dtype)
    U, s, Vh = sla.svd(P)
    r = int(np.count_nonzero(s > tol * s[0]))
    return U[:, :r], Vh[r:].conj().T


def _kt_from_powers(S, Sm, S1, tol_m, tol_1, tol, angle_tol):
    n = S.shape[0]
    ran_m, ker_m = _range_kernel(Sm, tol_m)
    ran_1, ker_1 = _range_kernel(S1, tol_1)
    if ran_m.shape[1] == 0 or ker_1.shape[1] == 0:
        inter, angle = True, np.pi / 2
    else:
        angle = float(np.min(sla.subspace_angles(ran_m, ker_1)))
        inter = angle > angle_tol
    both = np.hstack([ran_1, ker_m])
    if both.shape[1] < n:
        full = False
    else:
        full = numerical_rank(both, tol).rank == n
    return inter, full, angle


def kaashoek_taylor(S, m: int, rank_tol_rule: float | None = None, angle_tol: float = 1e-6):
    """``(Ran S^m cap ker S == {0}, Ran S + ker S^m == whole space, smallest angle)``.

    The intersection is declared trivial when the smallest principal angle
    between the two subspaces exceeds ``angle_tol`` or either one is {0}.
    """
    S = _dense_square(S)
    if int(m) != m or m < 0:
        raise InvalidArgumentError("m must be an integer >= 0")
    n = S.shape[0]
    tol = default_rank_tol(n) if rank_tol_rule is None else rank_tol_rule
    powers, _, amps = normalized_powers(S, max(int(m), 1), tol)
    return _kt_from_powers(S, powers[int(m)], powers[1], _power_tol(tol, amps[int(m)]),
                           _power_tol(tol, amps[1]), tol, angle_tol)


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal column basis (n x k)."""

    Q: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q)
        if Q.ndim != 2:
            raise InvalidArgumentError("basis must be a 2D array")
        G = Q.conj().T @ Q
        if Q.shape[1] and np.abs(G - np.eye(Q.shape[1])).max() > 1e-12:
            raise InvalidArgumentError("basis columns are not orthonormal")

    @classmethod
    def span(cls, X, tol: float | None = None):
        """Orthonormal basis of the column span of ``X``."""
        X = np.asarray(X)
        if X.shape[1] == 0:
            return cls(np.zeros((X.shape[0], 0), dtype=X.dtype))
        return cls(sla.orth(X, rcond=tol))

    @property
    def ambient(self) -> int:
        return self.Q.shape[0]

    @property
    def dim(self) -> int:
        return self.Q.shape[1]


def _as_basis(E):
    return E if isinstance(E, SubspaceBasis) else SubspaceBasis.span(E)


def subspace_gap(E, F) -> float:
    """``||P_E - P_F||_2``: 1 if dimensions differ, else the sine of the largest angle."""
    E, F = _as_basis(E), _as_basis(F)
    if E.ambient != F.ambient:
        raise InvalidArgumentError("subspaces live in different ambient spaces")
    if E.dim != F.dim:
        return 1.0
    if E.dim == 0:
        return 0.0
    # (I - P_E) F is accurate for small angles, unlike sqrt(1 - cos^2)
    R = F.Q - E.Q @ (E.Q.conj().T @ F.Q)
    return float(min(1.0, np.linalg.norm(R, 2)))


def _solve_operator(A, M, lam):
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    M = M.toarray() if sp.issparse(M) else np.asarray(M)
    lam = complex(lam)
    lam = lam.real if lam.imag == 0 else lam
    return sla.solve(M, A - lam * M, assume_a="pos")


def graph_power_gap(A1, M1, A2, M2, lam, m: int, prolongation=None) -> float:
    """Gap between the graphs of ``S_1^m`` and ``S_2^m`` with ``S_i = M_i^{-1}(A_i - lam M_i)``.

    ``prolongation`` ``P`` (n2 x n1) identifies the first DOF set with a
    subspace of the second; the graphs compared are
    ``{(P x, P S_1^m x)}`` and ``{(P x, S_2^m P x)}`` inside ``C^{2 n2}``.
    """
    if int(m) != m or m < 1:
        raise InvalidArgumentError("m must be an integer >= 1")
    S1 = _solve_operator(A1, M1, lam)
    S2 = _solve_operator(A2, M2, lam)
    n1, n2 = S1.shape[0], S2.shape[0]
    if max(n1, n2) > DENSE_LIMIT:
        raise InvalidArgumentError(f"graph gaps limited to n <= {DENSE_LIMIT}")
    P = np.eye(n1) if prolongation is None else (
        prolongation.toarray() if sp.issparse(prolongation) else np.asarray(prolongation))
    if P.shape != (n2, n1):
        raise InvalidArgumentError(f"prolongation must be {n2} x {n1}, got {P.shape}")
    S1m = np.linalg.matrix_power(S1, int(m))
    S2m = np.linalg.matrix_power(S2, int(m))
    G1 = np.vstack([P, P @ S1m])
    G2 = np.vstack([P, S2m @ P])
    return subspace_gap(SubspaceBasis.span(G1), SubspaceBasis.span(G2))


def interpolation_1d(n_coarse_cells: int, free_right: bool = False):
    """Linear interpolation from a grid with N cells to one with 2N cells.

    Rows/columns cover the interior nodes, plus the right end node when
    ``free_right`` is set.
    """
    N = int(n_coarse_cells)
    nc = N if free_right else N - 1
    nf = 2 * N if free_right else 2 * N - 1
    P = np.zeros((nf, nc))
    for i in range(nc):
        # coarse node i+1 sits at fine node 2(i+1)
        P[2 * i + 1, i] = 1.0
        P[2 * i, i] += 0.5
        if 2 * i + 2 < nf:
            P[2 * i + 2, i] += 0.5
    return P


def injection_1d(n_coarse_cells: int, free_right: bool = False):
    """Coarse nodal values placed on coinciding fine nodes, zero elsewhere."""
    N = int(n_coarse_cells)
    nc = N if free_right else N - 1
    nf = 2 * N if free_right else 2 * N - 1
    P = np.zeros((nf, nc))
    P[2 * np.arange(nc) + 1, np.arange(nc)] = 1.0
    return P
