"""Numpy fallbacks for the compiled kernels in ``_kernels.pyx``."""

import numpy as np

INV_LN2 = 1.4426950408889634


def jacobi_eigh(a_in, tol=1e-15, max_sweeps=100):
    a = np.array(a_in, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    scale = float(np.sum(a * a))
    if scale == 0.0:
        return np.zeros(n), v, 0
    iu = np.triu_indices(n, 1)
    sweep = 0
    while sweep < max_sweeps:
        off = float(np.sum(a[iu] ** 2))
        if off <= tol * tol * scale:
            break
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, sweep


def pair_rates(gains, powers, orders, sigma2, dpc):
    gains = np.asarray(gains, dtype=np.float64)
    powers = np.asarray(powers, dtype=np.float64)
    orders = np.asarray(orders, dtype=np.int64)
    n_s, n = gains.shape[:2]
    out = np.zeros((n_s, powers.shape[0], orders.shape[0], n))
    # received[s, r, i, k, j] = p_j |h_(i,k)^H u_j|^2
    received = gains[:, None, :, :, :] * powers[None, :, None, None, :]
    for o, order in enumerate(orders):
        for pos, i in enumerate(order):
            if dpc:
                later = list(order[pos + 1:])
            else:
                later = [j for j in range(n) if j != i]
            sub = received[:, :, i]
            interf = sub[..., later].sum(axis=-1) if later else 0.0
            sinr = sub[..., i] / (interf + sigma2)
            out[:, :, o, i] = (np.log1p(sinr) * INV_LN2).sum(axis=-1)
    return out


def fixed_point_power(coupling, direct, targets, sigma2, tol=1e-12, cap=1e12,
                      max_iter=200000):
    coupling = np.asarray(coupling, dtype=np.float64)
    scale = np.asarray(targets, dtype=np.float64) / np.asarray(direct, dtype=np.float64)
    p = np.zeros(coupling.shape[1])
    growth = 0.0
    status = 2
    it = 0
    while it < max_iter:
        it += 1
        q = np.max(scale * (coupling @ p + sigma2), axis=0)
        step = float(np.max(np.abs(q - p)))
        norm_p = float(np.max(p))
        norm_q = float(np.max(q))
        p = q
        if norm_p > 0.0:
            growth = norm_q / norm_p
        if step <= tol * (1.0 + norm_p):
            status = 0
            break
        if norm_q > cap * sigma2:
            status = 1
            break
    return p, it, status, growth
