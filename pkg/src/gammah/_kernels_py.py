"""Pure-Python (numpy/LAPACK) twins of the compiled kernels in ``_kernels.pyx``."""
import numpy as np
from scipy.linalg import cholesky_banded, LinAlgError
from scipy.linalg.lapack import dtbtrs


def p1_triplets(xy, tri, dof, eps, bx, by, supg):
    xy = np.asarray(xy, dtype=np.float64)
    tri = np.asarray(tri, dtype=np.int64)
    dof = np.asarray(dof, dtype=np.int64)
    p0, p1, p2 = xy[tri[:, 0]], xy[tri[:, 1]], xy[tri[:, 2]]
    area2 = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    area = 0.5 * area2
    bad = np.flatnonzero(area < 1e-14)
    empty = np.empty(0, dtype=np.int64)
    if bad.size:
        return empty, empty, np.empty(0), np.empty(0), int(bad[0])
    gx = np.stack([p1[:, 1] - p2[:, 1], p2[:, 1] - p0[:, 1], p0[:, 1] - p1[:, 1]], axis=1) / area2[:, None]
    gy = np.stack([p2[:, 0] - p1[:, 0], p0[:, 0] - p2[:, 0], p1[:, 0] - p0[:, 0]], axis=1) / area2[:, None]
    bg = bx * gx + by * gy
    bnorm = np.hypot(bx, by)
    if supg > 0.0 and bnorm > 0.0:
        edges = np.stack([np.linalg.norm(p1 - p0, axis=1),
                          np.linalg.norm(p2 - p1, axis=1),
                          np.linalg.norm(p0 - p2, axis=1)], axis=1)
        delta_k = supg * edges.max(axis=1) / bnorm
    else:
        delta_k = np.zeros(len(tri))

    a_loc = (eps * area[:, None, None] * (gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :])
             + (area / 3.0)[:, None, None] * bg[:, None, :]
             + (delta_k * area)[:, None, None] * bg[:, :, None] * bg[:, None, :])
    m_loc = (area / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))[None, :, :]

    d = dof[tri]
    rows = np.broadcast_to(d[:, :, None], (len(tri), 3, 3))
    cols = np.broadcast_to(d[:, None, :], (len(tri), 3, 3))
    keep = (rows >= 0) & (cols >= 0)
    return (rows[keep].astype(np.int64), cols[keep].astype(np.int64),
            a_loc[keep], m_loc[keep], -1)


def _band_index(first, ptr):
    n = len(first)
    lengths = np.diff(ptr)
    i = np.repeat(np.arange(n), lengths)
    j = np.arange(ptr[-1]) - np.repeat(ptr[:-1], lengths) + np.repeat(first, lengths)
    bw = int((np.arange(n) - first).max()) if n else 0
    return i, j, bw


def envelope_cholesky(first, ptr, env):
    first = np.asarray(first)
    n = len(first)
    i, j, bw = _band_index(first, ptr)
    ab = np.zeros((bw + 1, n))
    ab[i - j, j] = env
    try:
        cb = cholesky_banded(ab, lower=True, check_finite=False)
    except LinAlgError as exc:
        # LAPACK reports the order of the failing leading minor
        msg = str(exc)
        digits = [int(tok) for tok in msg.replace("-", " ").split() if tok.isdigit()]
        return (digits[0] - 1) if digits else 0
    env[:] = cb[i - j, j]
    return -1


def _band_lower(first, ptr, env):
    i, j, bw = _band_index(np.asarray(first), ptr)
    ab = np.zeros((bw + 1, len(first)))
    ab[i - j, j] = env
    return ab, bw


def envelope_solve_lower(first, ptr, env, b):
    ab, bw = _band_lower(first, ptr, env)
    x, info = dtbtrs(ab, b, uplo="L", trans="N")
    b[:] = x


def envelope_solve_upper(first, ptr, env, b):
    ab, bw = _band_lower(first, ptr, env)
    x, info = dtbtrs(ab, b, uplo="L", trans="T")
    b[:] = x
