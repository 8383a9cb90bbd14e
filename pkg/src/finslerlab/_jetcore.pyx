# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for truncated Taylor arithmetic."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def mul(const double[::1] a, const double[::1] b,
        const cnp.int64_t[::1] ti, const cnp.int64_t[::1] tj,
        const cnp.int64_t[::1] tk, Py_ssize_t n):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n)
    cdef double[::1] c = out
    cdef Py_ssize_t p, m = ti.shape[0]
    for p in range(m):
        c[tk[p]] += a[ti[p]] * b[tj[p]]
    return out


def horner(const double[::1] coefs, const double[::1] h,
           const cnp.int64_t[::1] ti, const cnp.int64_t[::1] tj,
           const cnp.int64_t[::1] tk, Py_ssize_t n):
    # h must have zero constant term
    cdef Py_ssize_t order = coefs.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] acc_arr = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tmp_arr = np.zeros(n)
    cdef double[::1] acc = acc_arr
    cdef double[::1] tmp = tmp_arr
    cdef Py_ssize_t k, p, q, m = ti.shape[0]
    acc[0] = coefs[order]
    for k in range(order - 1, -1, -1):
        for q in range(n):
            tmp[q] = 0.0
        for p in range(m):
            tmp[tk[p]] += acc[ti[p]] * h[tj[p]]
        for q in range(n):
            acc[q] = tmp[q]
        acc[0] += coefs[k]
    return acc_arr
