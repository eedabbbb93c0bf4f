# cython: language_level=3
"""Compiled inner loops.

Every function here has a numpy twin in :mod:`bidirelay._kernels_py` with
the same signature and semantics; :mod:`bidirelay.kernels` picks one at
import time.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, log1p, sqrt

cnp.import_array()

cdef double INV_LN2 = 1.4426950408889634


def jacobi_eigh(double[:, ::1] a_in, double tol=1e-15, int max_sweeps=100):
    """Cyclic Jacobi eigen-decomposition of a real symmetric matrix.

    Returns ``(w, v, sweeps)`` with unsorted eigenvalues ``w`` and
    eigenvectors in the columns of ``v``.
    """
    cdef Py_ssize_t n = a_in.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a_arr = np.array(a_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t p, q, k
    cdef double off, scale, theta, t, c, s, akp, akq, apq
    cdef int sweep = 0

    scale = 0.0
    for p in range(n):
        for q in range(n):
            scale += a[p, q] * a[p, q]
    if scale == 0.0:
        return np.zeros(n), v_arr, 0

    while sweep < max_sweeps:
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
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
                    t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    akp = a[p, k]
                    akq = a[q, k]
                    a[p, k] = c * akp - s * akq
                    a[q, k] = s * akp + c * akq
                for k in range(n):
                    akp = v[k, p]
                    akq = v[k, q]
                    v[k, p] = c * akp - s * akq
                    v[k, q] = s * akp + c * akq
    w = np.empty(n, dtype=np.float64)
    for p in range(n):
        w[p] = a[p, p]
    return w, v_arr, sweep


def pair_rates(double[:, :, :, ::1] gains, double[:, ::1] powers,
               long[:, ::1] orders, double sigma2, bint dpc):
    """Per-pair sum rates for batches of beam sets, power splits and orders.

    ``gains[s, i, k, j]`` is ``|h_(i,k)^H u_j|^2`` for beam set ``s``;
    ``orders[o, pos]`` is the pair encoded at position ``pos``. With
    ``dpc`` false the order is ignored and every other beam interferes.
    Output has shape ``(S, P, O, N)`` in bits per channel use.
    """
    cdef Py_ssize_t n_s = gains.shape[0]
    cdef Py_ssize_t n = gains.shape[1]
    cdef Py_ssize_t n_p = powers.shape[0]
    cdef Py_ssize_t n_o = orders.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=4] out_arr = np.zeros(
        (n_s, n_p, n_o, n), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t s, r, o, pos, pos2, i, j, k
    cdef double interf, rate

    for s in range(n_s):
        for r in range(n_p):
            for o in range(n_o):
                for pos in range(n):
                    i = orders[o, pos]
                    rate = 0.0
                    for k in range(2):
                        interf = 0.0
                        if dpc:
                            for pos2 in range(pos + 1, n):
                                j = orders[o, pos2]
                                interf += powers[r, j] * gains[s, i, k, j]
                        else:
                            for j in range(n):
                                if j != i:
                                    interf += powers[r, j] * gains[s, i, k, j]
                        rate += log1p(powers[r, i] * gains[s, i, k, i]
                                      / (interf + sigma2)) * INV_LN2
                    out[s, r, o, i] = rate
    return out_arr


def fixed_point_power(double[:, :, ::1] coupling, double[:, ::1] direct,
                      double[:, ::1] targets, double sigma2, double tol=1e-12,
                      double cap=1e12, long max_iter=200000):
    """Monotone iteration ``p <- max_k D_k^-1 (G_k V_k p + sigma2 G_k 1)`` from 0.

    Returns ``(p, iterations, status, growth)`` where status is 0 when
    converged, 1 when the iterate norm exceeded ``cap * sigma2`` and 2 when
    the iteration budget ran out. ``growth`` is the last ratio of successive
    sup-norms.
    """
    cdef Py_ssize_t n_k = coupling.shape[0]
    cdef Py_ssize_t n = coupling.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p_arr = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] q_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] p = p_arr
    cdef double[::1] q = q_arr
    cdef Py_ssize_t it, i, j, k
    cdef double best, val, acc, step, norm_p, norm_q
    cdef double growth = 0.0
    cdef int status = 2

    it = 0
    while it < max_iter:
        it += 1
        norm_p = 0.0
        norm_q = 0.0
        step = 0.0
        for i in range(n):
            best = 0.0
            for k in range(n_k):
                acc = 0.0
                for j in range(n):
                    acc += coupling[k, i, j] * p[j]
                val = targets[k, i] * (acc + sigma2) / direct[k, i]
                if val > best:
                    best = val
            q[i] = best
        for i in range(n):
            if fabs(q[i] - p[i]) > step:
                step = fabs(q[i] - p[i])
            if p[i] > norm_p:
                norm_p = p[i]
            if q[i] > norm_q:
                norm_q = q[i]
            p[i] = q[i]
        if norm_p > 0.0:
            growth = norm_q / norm_p
        if step <= tol * (1.0 + norm_p):
            status = 0
            break
        if norm_q > cap * sigma2:
            status = 1
            break
    return p_arr, it, status, growth
