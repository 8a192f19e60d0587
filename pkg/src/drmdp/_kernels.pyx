# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def tv_inf_rows(mu, values, double rho):
    cdef const double[:, ::1] m = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = m.shape[0], S = m.shape[1]
    cdef Py_ssize_t[::1] order = np.argsort(np.asarray(v), kind="stable").astype(np.intp)
    cdef double[::1] sv = np.empty(S)
    cdef double[::1] tail = np.empty(S)
    out = np.empty(n)
    out_alpha = np.empty(n)
    cdef double[::1] o = out
    cdef double[::1] oa = out_alpha
    cdef Py_ssize_t r, j
    cdef double lower, acc, f, best, best_alpha, alpha, vmin
    cdef bint first
    for j in range(S):
        sv[j] = v[order[j]]
    vmin = sv[0]
    for r in range(n):
        acc = 0.0
        tail[S - 1] = 0.0
        for j in range(S - 1, 0, -1):
            acc = acc + m[r, order[j]]
            tail[j - 1] = acc
        lower = 0.0
        best = 0.0
        best_alpha = 0.0
        first = True
        for j in range(S):
            lower = lower + m[r, order[j]] * sv[j]
            if j == S - 1 or sv[j + 1] > sv[j]:
                alpha = sv[j]
                f = lower + alpha * tail[j] - rho * (alpha - vmin)
                if first or f > best:
                    best = f
                    best_alpha = alpha
                    first = False
        o[r] = best
        oa[r] = best_alpha
    return out, out_alpha


def greedy_rows(mu, values, double rho):
    vals = np.ascontiguousarray(values, dtype=np.float64)
    out = np.array(mu, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] m = out
    cdef Py_ssize_t n = m.shape[0], S = m.shape[1]
    cdef Py_ssize_t target = int(np.argmin(vals))
    cdef Py_ssize_t[::1] order = np.lexsort((np.arange(S), -vals)).astype(np.intp)
    cdef Py_ssize_t r, j, s
    cdef double budget, moved, take
    for r in range(n):
        budget = rho
        moved = 0.0
        for j in range(S):
            if budget <= 0.0:
                break
            s = order[j]
            if s == target:
                continue
            take = m[r, s] if m[r, s] < budget else budget
            m[r, s] -= take
            moved += take
            budget -= take
        m[r, target] += moved
    return out


def select_alpha(z, offsets):
    cdef const double[:, ::1] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] off = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef Py_ssize_t C = zz.shape[0], d = zz.shape[1]
    nu = np.empty(d)
    idx = np.zeros(d, dtype=np.intp)
    cdef double[::1] nv = nu
    cdef Py_ssize_t[::1] iv = idx
    cdef Py_ssize_t c, i
    cdef double f
    for i in range(d):
        nv[i] = zz[0, i] - off[0]
        iv[i] = 0
        for c in range(1, C):
            f = zz[c, i] - off[c]
            if f > nv[i]:
                nv[i] = f
                iv[i] = c
    return nu, idx
