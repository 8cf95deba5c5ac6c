# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled counting kernels; see ``_pykernels`` for the conventions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "cython"


cdef inline void _one(const cnp.int64_t[::1] lab, const cnp.int64_t[:, ::1] inv,
                      const cnp.int64_t[:, ::1] coord, Py_ssize_t e_pos,
                      const double[::1] mu, cnp.int64_t* counts,
                      cnp.int64_t* out_mm, double* out_meas) noexcept nogil:
    cdef Py_ssize_t d = lab.shape[0]
    cdef Py_ssize_t nF = inv.shape[0]
    cdef Py_ssize_t m = coord.shape[1]
    cdef Py_ssize_t i, k, a
    cdef cnp.int64_t mm, best = 0
    cdef double acc = 0.0
    for i in range(nF):
        mm = 0
        for k in range(d):
            if coord[e_pos, lab[inv[i, k]]] != coord[i, lab[k]]:
                mm += 1
        if mm > best:
            best = mm
    for a in range(m):
        counts[a] = 0
    for k in range(d):
        counts[lab[k]] += 1
    for a in range(m):
        acc = acc + fabs(<double>counts[a] / <double>d - mu[a])
    out_mm[0] = best
    out_meas[0] = acc


def labeling_defects(labels, inv, coord, Py_ssize_t e_pos, mu):
    cdef const cnp.int64_t[:, ::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef const cnp.int64_t[:, ::1] inv_v = np.ascontiguousarray(inv, dtype=np.int64)
    cdef const cnp.int64_t[:, ::1] coord_v = np.ascontiguousarray(coord, dtype=np.int64)
    cdef const double[::1] mu_v = np.ascontiguousarray(mu, dtype=np.float64)
    cdef Py_ssize_t T = lab.shape[0]
    cdef Py_ssize_t m = coord_v.shape[1]
    max_mm = np.empty(T, dtype=np.int64)
    meas = np.empty(T, dtype=np.float64)
    cdef cnp.int64_t[::1] mm_v = max_mm
    cdef double[::1] meas_v = meas
    cdef cnp.int64_t* counts = <cnp.int64_t*> malloc(max(m, 1) * sizeof(cnp.int64_t))
    cdef Py_ssize_t t
    if counts == NULL:
        raise MemoryError()
    try:
        with nogil:
            for t in range(T):
                _one(lab[t], inv_v, coord_v, e_pos, mu_v, counts, &mm_v[t], &meas_v[t])
    finally:
        free(counts)
    return max_mm, meas


def decode(indices, Py_ssize_t m, Py_ssize_t d):
    cdef const cnp.int64_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    out = np.empty((idx.shape[0], d), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] o = out
    cdef Py_ssize_t t, k
    cdef cnp.int64_t v
    with nogil:
        for t in range(idx.shape[0]):
            v = idx[t]
            for k in range(d):
                o[t, k] = v % m
                v = v // m
    return out


def enumerate_defects(Py_ssize_t m, Py_ssize_t d, cnp.int64_t start, Py_ssize_t count, inv, coord,
                      Py_ssize_t e_pos, mu):
    cdef const cnp.int64_t[:, ::1] inv_v = np.ascontiguousarray(inv, dtype=np.int64)
    cdef const cnp.int64_t[:, ::1] coord_v = np.ascontiguousarray(coord, dtype=np.int64)
    cdef const double[::1] mu_v = np.ascontiguousarray(mu, dtype=np.float64)
    max_mm = np.empty(count, dtype=np.int64)
    meas = np.empty(count, dtype=np.float64)
    cdef cnp.int64_t[::1] mm_v = max_mm
    cdef double[::1] meas_v = meas
    lab_arr = decode(np.array([start], dtype=np.int64), m, d)[0].copy()
    cdef cnp.int64_t[::1] lab = lab_arr
    cdef cnp.int64_t* counts = <cnp.int64_t*> malloc(max(m, 1) * sizeof(cnp.int64_t))
    cdef Py_ssize_t t, k
    if counts == NULL:
        raise MemoryError()
    try:
        with nogil:
            for t in range(count):
                _one(lab, inv_v, coord_v, e_pos, mu_v, counts, &mm_v[t], &meas_v[t])
                # little-endian odometer
                k = 0
                while k < d:
                    lab[k] += 1
                    if lab[k] < m:
                        break
                    lab[k] = 0
                    k += 1
    finally:
        free(counts)
    return max_mm, meas


def gamma_labels(gamma, inv, cnp.int64_t n):
    cdef const cnp.int64_t[:, ::1] g = np.ascontiguousarray(gamma, dtype=np.int64)
    cdef const cnp.int64_t[:, ::1] inv_v = np.ascontiguousarray(inv, dtype=np.int64)
    out = np.zeros((g.shape[0], g.shape[1]), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] o = out
    cdef Py_ssize_t t, i, k
    with nogil:
        for t in range(g.shape[0]):
            for i in range(inv_v.shape[0]):
                for k in range(g.shape[1]):
                    o[t, k] = o[t, k] * n + g[t, inv_v[i, k]]
    return out
