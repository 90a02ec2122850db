# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.  Contracts are documented in ``_fallback.py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, isfinite

cnp.import_array()

ctypedef cnp.int64_t i64


def consensus_rounds(double[:, ::1] W, double[:, ::1] Wn, double[:, ::1] polyak,
                     const i64[::1] x_indptr, const i64[::1] x_indices, const double[::1] x_data,
                     const double[::1] y, const i64[:, :, ::1] rows, const cnp.uint8_t[::1] comm,
                     const i64[::1] p_indptr, const i64[::1] p_indices, const double[::1] p_data,
                     i64 t0, double mu, int loss, double guard):
    cdef Py_ssize_t R = rows.shape[0], m = rows.shape[1], b = rows.shape[2], d = W.shape[1]
    cdef Py_ssize_t r, i, j, k, s, jj, nz
    cdef i64 row, t
    cdef double dot, z, c, p, inv_t, scale, acc, lab
    cdef double[:, ::1] cur = W
    cdef double[:, ::1] nxt = Wn
    cdef double[:, ::1] tmp
    cdef double[:, ::1] coef = np.empty((m, b))
    cdef Py_ssize_t bad = -1
    cdef int swapped = 0

    with nogil:
        for r in range(R):
            t = t0 + r
            inv_t = 1.0 / t
            scale = 1.0 / (mu * t * b)
            for i in range(m):
                for k in range(d):
                    polyak[i, k] += cur[i, k]
            for i in range(m):
                for s in range(b):
                    row = rows[r, i, s]
                    dot = 0.0
                    for nz in range(x_indptr[row], x_indptr[row + 1]):
                        dot = dot + cur[i, x_indices[nz]] * x_data[nz]
                    lab = y[row]
                    z = lab * dot
                    if loss == 0:
                        c = -lab if z < 1.0 else 0.0
                    else:
                        c = (z - 1.0) * lab
                    coef[i, s] = c
            for i in range(m):
                if comm[r]:
                    for k in range(d):
                        nxt[i, k] = 0.0
                    for jj in range(p_indptr[i], p_indptr[i + 1]):
                        j = p_indices[jj]
                        p = p_data[jj]
                        for k in range(d):
                            nxt[i, k] += p * cur[j, k]
                    for k in range(d):
                        nxt[i, k] -= inv_t * cur[i, k]
                else:
                    for k in range(d):
                        nxt[i, k] = cur[i, k] - inv_t * cur[i, k]
                for s in range(b):
                    c = coef[i, s]
                    if c != 0.0:
                        row = rows[r, i, s]
                        c = c * scale
                        for nz in range(x_indptr[row], x_indptr[row + 1]):
                            nxt[i, x_indices[nz]] -= c * x_data[nz]
            tmp = cur
            cur = nxt
            nxt = tmp
            swapped = 1 - swapped
            if guard > 0:
                for i in range(m):
                    acc = 0.0
                    for k in range(d):
                        acc = acc + cur[i, k] * cur[i, k]
                    if not isfinite(acc) or sqrt(acc) > guard:
                        bad = r
                        break
                if bad >= 0:
                    break
    return swapped, bad


def sdca_epoch(const i64[::1] x_indptr, const i64[::1] x_indices, const double[::1] x_data,
               const double[::1] y, const double[::1] sqnorm, double[::1] alpha, double[::1] w,
               const i64[::1] order, double mu_n):
    cdef Py_ssize_t q, nz, n = order.shape[0]
    cdef i64 i
    cdef double dot, a_new, delta, step
    with nogil:
        for q in range(n):
            i = order[q]
            if sqnorm[i] == 0.0:
                alpha[i] = 1.0
                continue
            dot = 0.0
            for nz in range(x_indptr[i], x_indptr[i + 1]):
                dot = dot + w[x_indices[nz]] * x_data[nz]
            a_new = alpha[i] + (1.0 - y[i] * dot) * mu_n / sqnorm[i]
            if a_new < 0.0:
                a_new = 0.0
            elif a_new > 1.0:
                a_new = 1.0
            delta = a_new - alpha[i]
            if delta != 0.0:
                alpha[i] = a_new
                step = delta * y[i] / mu_n
                for nz in range(x_indptr[i], x_indptr[i + 1]):
                    w[x_indices[nz]] += step * x_data[nz]
