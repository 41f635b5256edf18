"""Pure-numpy trial kernel.

Computes the zero-forcing statistics [(Z^H Z)^-1]_mm for a batch of
standard-normal draws. The arithmetic is written as explicit loops over
the (small) antenna/stream dimensions with the trial axis vectorized, so
every multiply/add happens in exactly the same order as the compiled
kernel: the two backends return bit-identical statistics. Do not
"optimize" these loops into matmul calls; BLAS reassociates sums.
"""

import numpy as np

_SQRT_HALF = np.sqrt(0.5)


def stats_from_draws(draws, a_re, a_im, b_re, b_im):
    """ZF statistics for each trial and stream.

    draws: (n, n_r, m, 2) standard normal; a = R_r^(1/2), b = R_t'^(1/2)
    split into real/imag parts. Returns (stats (n, m) float64, valid (n,)
    bool); trials whose Gram matrix is not numerically positive definite
    are flagged invalid and carry NaN statistics.
    """
    n, n_r, m, _ = draws.shape
    zw_re = draws[:, :, :, 0] * _SQRT_HALF
    zw_im = draws[:, :, :, 1] * _SQRT_HALF

    t_re = np.zeros((n, n_r, m))
    t_im = np.zeros((n, n_r, m))
    for i in range(n_r):
        for al in range(n_r):
            t_re[:, i, :] += a_re[i, al] * zw_re[:, al, :] - a_im[i, al] * zw_im[:, al, :]
            t_im[:, i, :] += a_re[i, al] * zw_im[:, al, :] + a_im[i, al] * zw_re[:, al, :]

    z_re = np.zeros((n, n_r, m))
    z_im = np.zeros((n, n_r, m))
    for c in range(m):
        for b in range(m):
            z_re[:, :, c] += t_re[:, :, b] * b_re[b, c] - t_im[:, :, b] * b_im[b, c]
            z_im[:, :, c] += t_re[:, :, b] * b_im[b, c] + t_im[:, :, b] * b_re[b, c]

    g_re = np.zeros((n, m, m))
    g_im = np.zeros((n, m, m))
    for aa in range(m):
        for bb in range(m):
            for i in range(n_r):
                g_re[:, aa, bb] += z_re[:, i, aa] * z_re[:, i, bb] + z_im[:, i, aa] * z_im[:, i, bb]
                g_im[:, aa, bb] += z_re[:, i, aa] * z_im[:, i, bb] - z_im[:, i, aa] * z_re[:, i, bb]

    # Cholesky G = L L^H with real positive diagonal; a nonpositive pivot
    # marks the trial invalid (measure-zero for genuine channel draws).
    l_re = np.zeros((n, m, m))
    l_im = np.zeros((n, m, m))
    valid = np.ones(n, dtype=bool)
    for j in range(m):
        s = g_re[:, j, j].copy()
        for t in range(j):
            s -= l_re[:, j, t] * l_re[:, j, t] + l_im[:, j, t] * l_im[:, j, t]
        good = s > 0
        valid &= good
        dj = np.sqrt(np.where(good, s, 1.0))
        l_re[:, j, j] = dj
        for i in range(j + 1, m):
            acc_re = g_re[:, i, j].copy()
            acc_im = g_im[:, i, j].copy()
            for t in range(j):
                acc_re -= l_re[:, i, t] * l_re[:, j, t] + l_im[:, i, t] * l_im[:, j, t]
                acc_im -= l_im[:, i, t] * l_re[:, j, t] - l_re[:, i, t] * l_im[:, j, t]
            l_re[:, i, j] = acc_re / dj
            l_im[:, i, j] = acc_im / dj

    # stat_m = sum_{i>=m} |[L^-1]_{i,m}|^2 via forward substitution.
    w_re = np.zeros((n, m, m))
    w_im = np.zeros((n, m, m))
    stats = np.zeros((n, m))
    for mc in range(m):
        w_re[:, mc, mc] = 1.0 / l_re[:, mc, mc]
        for i in range(mc + 1, m):
            acc_re = np.zeros(n)
            acc_im = np.zeros(n)
            for t in range(mc, i):
                acc_re += l_re[:, i, t] * w_re[:, t, mc] - l_im[:, i, t] * w_im[:, t, mc]
                acc_im += l_re[:, i, t] * w_im[:, t, mc] + l_im[:, i, t] * w_re[:, t, mc]
            w_re[:, i, mc] = -acc_re / l_re[:, i, i]
            w_im[:, i, mc] = -acc_im / l_re[:, i, i]
        acc = np.zeros(n)
        for i in range(mc, m):
            acc += w_re[:, i, mc] * w_re[:, i, mc] + w_im[:, i, mc] * w_im[:, i, mc]
        stats[:, mc] = acc
    stats[~valid] = np.nan
    return stats, valid
