# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trial kernel.

Mirrors _backend_py.stats_from_draws operation for operation: same
multiply/add sequence, same pivot rule, so the two backends produce
bit-identical statistics (the extension is compiled with
-ffp-contract=off to keep FMA contraction from changing roundings).
"""

from libc.math cimport sqrt
from libc.stdlib cimport free, malloc

import numpy as np

cdef double SQRT_HALF = sqrt(0.5)


def stats_from_draws(double[:, :, :, ::1] draws,
                     double[:, ::1] a_re, double[:, ::1] a_im,
                     double[:, ::1] b_re, double[:, ::1] b_im):
    cdef Py_ssize_t n = draws.shape[0]
    cdef Py_ssize_t n_r = draws.shape[1]
    cdef Py_ssize_t m = draws.shape[2]

    stats_arr = np.full((n, m), np.nan, dtype=np.float64)
    valid_arr = np.zeros(n, dtype=np.uint8)
    cdef double[:, ::1] stats = stats_arr
    cdef unsigned char[::1] valid = valid_arr

    cdef Py_ssize_t sz_nm = n_r * m
    cdef Py_ssize_t sz_mm = m * m
    cdef double *buf = <double *> malloc((4 * sz_nm + 6 * sz_mm) * sizeof(double))
    if buf is NULL:
        raise MemoryError()
    cdef double *zw_re = buf
    cdef double *zw_im = buf + sz_nm
    cdef double *t_re = buf + 2 * sz_nm
    cdef double *t_im = buf + 3 * sz_nm
    cdef double *g_re = buf + 4 * sz_nm
    cdef double *g_im = buf + 4 * sz_nm + sz_mm
    cdef double *l_re = buf + 4 * sz_nm + 2 * sz_mm
    cdef double *l_im = buf + 4 * sz_nm + 3 * sz_mm
    cdef double *w_re = buf + 4 * sz_nm + 4 * sz_mm
    cdef double *w_im = buf + 4 * sz_nm + 5 * sz_mm

    cdef Py_ssize_t tr, i, al, c, b, aa, bb, j, t, mc
    cdef double acc_re, acc_im, s, dj, acc
    cdef bint ok

    # z needs n_r*m storage too; reuse a second pair of buffers.
    cdef double *z_re = <double *> malloc(2 * sz_nm * sizeof(double))
    if z_re is NULL:
        free(buf)
        raise MemoryError()
    cdef double *z_im = z_re + sz_nm

    try:
        for tr in range(n):
            for i in range(n_r):
                for c in range(m):
                    zw_re[i * m + c] = draws[tr, i, c, 0] * SQRT_HALF
                    zw_im[i * m + c] = draws[tr, i, c, 1] * SQRT_HALF

            for i in range(n_r):
                for c in range(m):
                    t_re[i * m + c] = 0.0
                    t_im[i * m + c] = 0.0
                for al in range(n_r):
                    for c in range(m):
                        t_re[i * m + c] += a_re[i, al] * zw_re[al * m + c] - a_im[i, al] * zw_im[al * m + c]
                        t_im[i * m + c] += a_re[i, al] * zw_im[al * m + c] + a_im[i, al] * zw_re[al * m + c]

            for c in range(m):
                for i in range(n_r):
                    z_re[i * m + c] = 0.0
                    z_im[i * m + c] = 0.0
                for b in range(m):
                    for i in range(n_r):
                        z_re[i * m + c] += t_re[i * m + b] * b_re[b, c] - t_im[i * m + b] * b_im[b, c]
                        z_im[i * m + c] += t_re[i * m + b] * b_im[b, c] + t_im[i * m + b] * b_re[b, c]

            for aa in range(m):
                for bb in range(m):
                    acc_re = 0.0
                    acc_im = 0.0
                    for i in range(n_r):
                        acc_re += z_re[i * m + aa] * z_re[i * m + bb] + z_im[i * m + aa] * z_im[i * m + bb]
                        acc_im += z_re[i * m + aa] * z_im[i * m + bb] - z_im[i * m + aa] * z_re[i * m + bb]
                    g_re[aa * m + bb] = acc_re
                    g_im[aa * m + bb] = acc_im

            ok = True
            for j in range(m):
                for t in range(m):
                    l_re[j * m + t] = 0.0
                    l_im[j * m + t] = 0.0
            for j in range(m):
                s = g_re[j * m + j]
                for t in range(j):
                    s -= l_re[j * m + t] * l_re[j * m + t] + l_im[j * m + t] * l_im[j * m + t]
                if not s > 0.0:
                    ok = False
                    break
                dj = sqrt(s)
                l_re[j * m + j] = dj
                for i in range(j + 1, m):
                    acc_re = g_re[i * m + j]
                    acc_im = g_im[i * m + j]
                    for t in range(j):
                        acc_re -= l_re[i * m + t] * l_re[j * m + t] + l_im[i * m + t] * l_im[j * m + t]
                        acc_im -= l_im[i * m + t] * l_re[j * m + t] - l_re[i * m + t] * l_im[j * m + t]
                    l_re[i * m + j] = acc_re / dj
                    l_im[i * m + j] = acc_im / dj
            if not ok:
                continue

            for mc in range(m):
                for t in range(m):
                    w_re[mc * m + t] = 0.0
                    w_im[mc * m + t] = 0.0
            for mc in range(m):
                w_re[mc * m + mc] = 1.0 / l_re[mc * m + mc]
                for i in range(mc + 1, m):
                    acc_re = 0.0
                    acc_im = 0.0
                    for t in range(mc, i):
                        acc_re += l_re[i * m + t] * w_re[t * m + mc] - l_im[i * m + t] * w_im[t * m + mc]
                        acc_im += l_re[i * m + t] * w_im[t * m + mc] + l_im[i * m + t] * w_re[t * m + mc]
                    w_re[i * m + mc] = -acc_re / l_re[i * m + i]
                    w_im[i * m + mc] = -acc_im / l_re[i * m + i]
                acc = 0.0
                for i in range(mc, m):
                    acc += w_re[i * m + mc] * w_re[i * m + mc] + w_im[i * m + mc] * w_im[i * m + mc]
                stats[tr, mc] = acc
            valid[tr] = 1
    finally:
        free(z_re)
        free(buf)
    return stats_arr, valid_arr.astype(bool)
