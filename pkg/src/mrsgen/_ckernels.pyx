# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_pykernels``; identical signatures."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport qsort, malloc, free

cnp.import_array()


def correlate1d(const double[:, :, ::1] x, const double[:, :, ::1] w, Py_ssize_t stride, Py_ssize_t pad):
    cdef Py_ssize_t B = x.shape[0], C_in = x.shape[1], L_in = x.shape[2]
    cdef Py_ssize_t C_out = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t L_out = (L_in + 2 * pad - K) // stride + 1
    out = np.zeros((B, C_out, L_out))
    cdef double[:, :, ::1] y = out
    cdef Py_ssize_t b, o, i, k, l, pos
    cdef double acc
    with nogil:
        for b in range(B):
            for o in range(C_out):
                for l in range(L_out):
                    acc = 0.0
                    for i in range(C_in):
                        for k in range(K):
                            pos = l * stride - pad + k
                            if 0 <= pos < L_in:
                                acc = acc + w[o, i, k] * x[b, i, pos]
                    y[b, o, l] = acc
    return out


def scatter1d(const double[:, :, ::1] g, const double[:, :, ::1] w, Py_ssize_t stride, Py_ssize_t pad, Py_ssize_t L_in):
    cdef Py_ssize_t B = g.shape[0], C_out = g.shape[1], L_out = g.shape[2]
    cdef Py_ssize_t C_in = w.shape[1], K = w.shape[2]
    out = np.zeros((B, C_in, L_in))
    cdef double[:, :, ::1] x = out
    cdef Py_ssize_t b, o, i, k, l, pos
    cdef double gv
    with nogil:
        for b in range(B):
            for o in range(C_out):
                for l in range(L_out):
                    gv = g[b, o, l]
                    for i in range(C_in):
                        for k in range(K):
                            pos = l * stride - pad + k
                            if 0 <= pos < L_in:
                                x[b, i, pos] += gv * w[o, i, k]
    return out


def weight_grad1d(const double[:, :, ::1] x, const double[:, :, ::1] g, Py_ssize_t stride, Py_ssize_t pad, Py_ssize_t K):
    cdef Py_ssize_t B = x.shape[0], C_in = x.shape[1], L_in = x.shape[2]
    cdef Py_ssize_t C_out = g.shape[1], L_out = g.shape[2]
    out = np.zeros((C_out, C_in, K))
    cdef double[:, :, ::1] gw = out
    cdef Py_ssize_t b, o, i, k, l, lo, hi
    cdef double acc
    with nogil:
        for o in range(C_out):
            for i in range(C_in):
                for k in range(K):
                    # output positions whose tap k lands inside the input
                    lo = (pad - k + stride - 1) // stride if pad > k else 0
                    # cdivision truncates toward zero, so keep the numerator non-negative
                    hi = (L_in - 1 + pad - k) // stride + 1 if L_in - 1 + pad >= k else 0
                    if hi > L_out:
                        hi = L_out
                    acc = 0.0
                    for b in range(B):
                        for l in range(lo, hi):
                            acc = acc + g[b, o, l] * x[b, i, l * stride - pad + k]
                    gw[o, i, k] = acc
    return out


cdef struct Pair:
    double value
    Py_ssize_t label


cdef int _cmp_pair(const void* a, const void* b) noexcept nogil:
    cdef double va = (<Pair*>a).value
    cdef double vb = (<Pair*>b).value
    return (va > vb) - (va < vb)


def split_scan(const double[:, :] X, const Py_ssize_t[:] y, const Py_ssize_t[:] features, Py_ssize_t n_classes):
    cdef Py_ssize_t n = X.shape[0], m = features.shape[0]
    cdef Py_ssize_t fi, f, i, c
    cdef Py_ssize_t best_f = -1
    cdef double best_t = 0.0, best_score = -np.inf, score
    cdef long long sl, sr, nl, nr
    cdef Pair* pairs = <Pair*>malloc(n * sizeof(Pair))
    cdef long long* total = <long long*>malloc(n_classes * sizeof(long long))
    cdef long long* left = <long long*>malloc(n_classes * sizeof(long long))
    if pairs == NULL or total == NULL or left == NULL:
        free(pairs); free(total); free(left)
        raise MemoryError()
    try:
        with nogil:
            for c in range(n_classes):
                total[c] = 0
            for i in range(n):
                total[y[i]] += 1
            for fi in range(m):
                f = features[fi]
                for i in range(n):
                    pairs[i].value = X[i, f]
                    pairs[i].label = y[i]
                qsort(pairs, n, sizeof(Pair), _cmp_pair)
                for c in range(n_classes):
                    left[c] = 0
                for i in range(n - 1):
                    left[pairs[i].label] += 1
                    if not pairs[i].value < pairs[i + 1].value:
                        continue
                    nl = i + 1
                    nr = n - nl
                    sl = 0
                    sr = 0
                    for c in range(n_classes):
                        sl += left[c] * left[c]
                        sr += (total[c] - left[c]) * (total[c] - left[c])
                    score = (<double>sl) / nl + (<double>sr) / nr
                    if score > best_score:
                        best_score = score
                        best_f = f
                        best_t = 0.5 * (pairs[i].value + pairs[i + 1].value)
    finally:
        free(pairs); free(total); free(left)
    return best_f, best_t, best_score
