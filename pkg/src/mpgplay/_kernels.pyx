# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner-loop kernels; same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()


def softmax_rows(const double[:, :] theta):
    cdef Py_ssize_t S = theta.shape[0], A = theta.shape[1], s, a
    cdef double m, tot
    out = np.empty((S, A))
    cdef double[:, ::1] o = out
    with nogil:
        for s in range(S):
            m = theta[s, 0]
            for a in range(1, A):
                if theta[s, a] > m:
                    m = theta[s, a]
            tot = 0.0
            for a in range(A):
                o[s, a] = exp(theta[s, a] - m)
                tot += o[s, a]
            for a in range(A):
                o[s, a] /= tot
    return out


def log_softmax_rows(const double[:, :] theta):
    cdef Py_ssize_t S = theta.shape[0], A = theta.shape[1], s, a
    cdef double m, tot
    out = np.empty((S, A))
    cdef double[:, ::1] o = out
    with nogil:
        for s in range(S):
            m = theta[s, 0]
            for a in range(1, A):
                if theta[s, a] > m:
                    m = theta[s, a]
            tot = 0.0
            for a in range(A):
                tot += exp(theta[s, a] - m)
            tot = log(tot)
            for a in range(A):
                o[s, a] = theta[s, a] - m - tot
    return out


cdef tuple _pack(list pis):
    cdef Py_ssize_t n = len(pis), k
    sizes = np.empty(n, dtype=np.intp)
    offsets = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t off = 0
    for k in range(n):
        sizes[k] = pis[k].shape[1]
        offsets[k] = off
        off += sizes[k]
    pcat = np.ascontiguousarray(np.concatenate(pis, axis=1), dtype=np.float64)
    return pcat, sizes, offsets


def joint_policy(list pis):
    pcat_, sizes_, offsets_ = _pack(pis)
    cdef double[:, ::1] pcat = pcat_
    cdef Py_ssize_t[::1] sizes = sizes_
    cdef Py_ssize_t[::1] offsets = offsets_
    cdef Py_ssize_t S = pcat.shape[0], n = sizes.shape[0]
    cdef Py_ssize_t J = 1, s, j, k
    for k in range(n):
        J *= sizes[k]
    out = np.empty((S, J))
    cdef double[:, ::1] o = out
    digits_ = np.zeros(n, dtype=np.intp)
    cdef Py_ssize_t[::1] digits = digits_
    cdef double w
    with nogil:
        for s in range(S):
            for k in range(n):
                digits[k] = 0
            for j in range(J):
                w = 1.0
                for k in range(n):
                    w *= pcat[s, offsets[k] + digits[k]]
                o[s, j] = w
                # increment mixed-radix counter, last agent fastest
                k = n - 1
                while k >= 0:
                    digits[k] += 1
                    if digits[k] < sizes[k]:
                        break
                    digits[k] = 0
                    k -= 1
    return out


def marginalize(const double[:, :, :] X, list pis, Py_ssize_t agent):
    pcat_, sizes_, offsets_ = _pack(pis)
    cdef double[:, ::1] pcat = pcat_
    cdef Py_ssize_t[::1] sizes = sizes_
    cdef Py_ssize_t[::1] offsets = offsets_
    cdef Py_ssize_t S = X.shape[0], J = X.shape[1], K = X.shape[2]
    cdef Py_ssize_t n = sizes.shape[0], s, j, k, q, ai
    out = np.zeros((S, sizes[agent], K))
    cdef double[:, :, ::1] o = out
    digits_ = np.zeros(n, dtype=np.intp)
    cdef Py_ssize_t[::1] digits = digits_
    cdef double w
    with nogil:
        for s in range(S):
            for k in range(n):
                digits[k] = 0
            for j in range(J):
                w = 1.0
                for k in range(n):
                    if k != agent:
                        w *= pcat[s, offsets[k] + digits[k]]
                ai = digits[agent]
                if w != 0.0:
                    for q in range(K):
                        o[s, ai, q] += w * X[s, j, q]
                k = n - 1
                while k >= 0:
                    digits[k] += 1
                    if digits[k] < sizes[k]:
                        break
                    digits[k] = 0
                    k -= 1
    return out
