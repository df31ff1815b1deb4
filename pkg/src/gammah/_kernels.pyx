# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: P1 element assembly and envelope Cholesky.

Every function here has a drop-in twin in ``_kernels_py`` with the same
signature and results (up to rounding); ``gammah.kernels`` picks one at import.
"""
import numpy as np
from libc.math cimport sqrt, fabs
from scipy.linalg.cython_blas cimport ddot


def p1_triplets(const double[:, ::1] xy, const long[:, ::1] tri, const long[::1] dof,
                double eps, double bx, double by, double supg):
    """COO triplets of the P1 operator and mass matrices over the free DOFs.

    Returns ``(rows, cols, avals, mvals, bad)`` where ``avals`` holds
    diffusion + convection + streamline-diffusion entries and ``bad`` is the
    index of the first degenerate triangle (-1 if none).
    """
    cdef Py_ssize_t nt = tri.shape[0]
    cdef Py_ssize_t t, i, j, p = 0
    cdef long vi[3]
    cdef long di[3]
    cdef double gx[3]
    cdef double gy[3]
    cdef double bg[3]
    cdef double x0, y0, x1, y1, x2, y2, area2, area, hk, e, delta_k
    cdef double bnorm = sqrt(bx * bx + by * by)

    rows_arr = np.empty(9 * nt, dtype=np.int64)
    cols_arr = np.empty(9 * nt, dtype=np.int64)
    a_arr = np.empty(9 * nt, dtype=np.float64)
    m_arr = np.empty(9 * nt, dtype=np.float64)
    cdef long[::1] rows = rows_arr
    cdef long[::1] cols = cols_arr
    cdef double[::1] av = a_arr
    cdef double[::1] mv = m_arr

    for t in range(nt):
        for i in range(3):
            vi[i] = tri[t, i]
            di[i] = dof[vi[i]]
        x0 = xy[vi[0], 0]; y0 = xy[vi[0], 1]
        x1 = xy[vi[1], 0]; y1 = xy[vi[1], 1]
        x2 = xy[vi[2], 0]; y2 = xy[vi[2], 1]
        area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        area = 0.5 * area2
        if area < 1e-14:
            return rows_arr[:0], cols_arr[:0], a_arr[:0], m_arr[:0], t
        gx[0] = (y1 - y2) / area2; gy[0] = (x2 - x1) / area2
        gx[1] = (y2 - y0) / area2; gy[1] = (x0 - x2) / area2
        gx[2] = (y0 - y1) / area2; gy[2] = (x1 - x0) / area2
        for i in range(3):
            bg[i] = bx * gx[i] + by * gy[i]
        delta_k = 0.0
        if supg > 0.0 and bnorm > 0.0:
            hk = sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2)
            e = sqrt((x2 - x1) ** 2 + (y2 - y1) ** 2)
            if e > hk:
                hk = e
            e = sqrt((x0 - x2) ** 2 + (y0 - y2) ** 2)
            if e > hk:
                hk = e
            delta_k = supg * hk / bnorm
        for i in range(3):
            if di[i] < 0:
                continue
            for j in range(3):
                if di[j] < 0:
                    continue
                rows[p] = di[i]
                cols[p] = di[j]
                av[p] = (eps * area * (gx[i] * gx[j] + gy[i] * gy[j])
                         + area / 3.0 * bg[j]
                         + delta_k * area * bg[i] * bg[j])
                mv[p] = area / 12.0 * (2.0 if i == j else 1.0)
                p += 1
    return rows_arr[:p], cols_arr[:p], a_arr[:p], m_arr[:p], -1


def envelope_cholesky(const long[::1] first, const long[::1] ptr, double[::1] env):
    """In-place envelope (skyline) Cholesky of a real SPD matrix.

    Row ``i`` of the lower triangle occupies ``env[ptr[i]:ptr[i+1]]`` and
    covers columns ``first[i] .. i``. Returns -1 on success, else the row of
    the first non-positive pivot.
    """
    cdef Py_ssize_t n = first.shape[0]
    cdef Py_ssize_t i, j, k0
    cdef long fi, fj
    cdef int length, one = 1
    cdef double s
    for i in range(n):
        fi = first[i]
        for j in range(fi, i + 1):
            fj = first[j]
            k0 = fi if fi > fj else fj
            s = env[ptr[i] + j - fi]
            length = <int>(j - k0)
            if length > 0:
                s -= ddot(&length, &env[ptr[i] + k0 - fi], &one, &env[ptr[j] + k0 - fj], &one)
            if j < i:
                env[ptr[i] + j - fi] = s / env[ptr[j + 1] - 1]
            else:
                if s <= 0.0:
                    return i
                env[ptr[i + 1] - 1] = sqrt(s)
    return -1


def envelope_solve_lower(const long[::1] first, const long[::1] ptr, const double[::1] env,
                         double[:, ::1] b):
    """Solve ``L x = b`` in place for each column of ``b`` (shape n x k)."""
    cdef Py_ssize_t n = first.shape[0]
    cdef Py_ssize_t nrhs = b.shape[1]
    cdef Py_ssize_t i, k, c
    cdef long fi
    cdef double s
    for c in range(nrhs):
        for i in range(n):
            fi = first[i]
            s = b[i, c]
            for k in range(fi, i):
                s -= env[ptr[i] + k - fi] * b[k, c]
            b[i, c] = s / env[ptr[i + 1] - 1]


def envelope_solve_upper(const long[::1] first, const long[::1] ptr, const double[::1] env,
                         double[:, ::1] b):
    """Solve ``L^T x = b`` in place for each column of ``b`` (shape n x k)."""
    cdef Py_ssize_t n = first.shape[0]
    cdef Py_ssize_t nrhs = b.shape[1]
    cdef Py_ssize_t i, k, c
    cdef long fi
    cdef double xi
    for c in range(nrhs):
        for i in range(n - 1, -1, -1):
            fi = first[i]
            xi = b[i, c] / env[ptr[i + 1] - 1]
            b[i, c] = xi
            for k in range(fi, i):
                b[k, c] -= env[ptr[i] + k - fi] * xi
