# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, sqrt, pow, isfinite

cnp.import_array()


def greedy_net(const double[:, ::1] rho, const long long[::1] order, double sep,
               double[::1] mind):
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t i, j, p
    out = np.empty(order.shape[0], dtype=np.int64)
    cdef long long[::1] o = out
    cdef Py_ssize_t cnt = 0
    for i in range(order.shape[0]):
        p = order[i]
        if mind[p] >= sep:
            o[cnt] = p
            cnt += 1
            for j in range(n):
                if rho[p, j] < mind[j]:
                    mind[j] = rho[p, j]
    return out[:cnt]


def cube_point_mindist(const double[:, ::1] rho, const long long[::1] labels,
                       Py_ssize_t ncubes):
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t i, j, c
    out = np.full((ncubes, n), np.inf)
    cdef double[:, ::1] o = out
    for i in range(n):
        c = labels[i]
        for j in range(n):
            if rho[i, j] < o[c, j]:
                o[c, j] = rho[i, j]
    return out


def group_min_cols(const double[:, ::1] dist, const long long[::1] labels,
                   Py_ssize_t ngroups):
    cdef Py_ssize_t rows = dist.shape[0]
    cdef Py_ssize_t cols = dist.shape[1]
    cdef Py_ssize_t i, j, g
    out = np.full((rows, ngroups), np.inf)
    cdef double[:, ::1] o = out
    for i in range(rows):
        for j in range(cols):
            g = labels[j]
            if dist[i, j] < o[i, g]:
                o[i, g] = dist[i, j]
    return out


def minplus(const double[:, ::1] rho):
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t x, y, z
    cdef double v, b
    best = np.full((n, n), np.inf)
    arg = np.zeros((n, n), dtype=np.int64)
    cdef double[:, ::1] B = best
    cdef long long[:, ::1] A = arg
    for x in range(n):
        for y in range(n):
            b = rho[x, y]
            for z in range(n):
                v = b + rho[y, z]
                if v < B[x, z]:
                    B[x, z] = v
                    A[x, z] = y
    return best, arg


def schur_sep(const double[:, ::1] dist, const double[::1] ell_r,
              const double[::1] ell_c, const double[::1] mu_r,
              const double[::1] mu_c, const double[:, ::1] lam, double alpha,
              const double[:, ::1] thresh):
    cdef Py_ssize_t R = dist.shape[0]
    cdef Py_ssize_t C = dist.shape[1]
    cdef Py_ssize_t i, j
    cdef double D, v
    out = np.zeros((R, C))
    cdef double[:, ::1] o = out
    for i in range(R):
        for j in range(C):
            if ell_r[i] <= ell_c[j] and dist[i, j] > thresh[i, j]:
                D = ell_r[i] + ell_c[j] + dist[i, j]
                v = pow(ell_r[i] * ell_c[j], alpha / 2.0) / (pow(D, alpha) * lam[i, j])
                v = v * sqrt(mu_r[i]) * sqrt(mu_c[j])
                if isfinite(v):
                    o[i, j] = v
    return out
