# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled walk and skip-gram kernels.

Every routine mirrors ``_pykernels`` operation for operation (same summation
order, same random inputs) so the two backends agree bit for bit.
"""

from libc.math cimport exp
from libc.stdint cimport int64_t

import numpy as np


cdef inline Py_ssize_t _search(const double[::1] cum, double x, Py_ssize_t last) noexcept nogil:
    # smallest j with cum[j] > x
    cdef Py_ssize_t lo = 0, hi = cum.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cum[mid] > x:
            hi = mid
        else:
            lo = mid + 1
    if lo >= cum.shape[0]:
        return last
    return lo


def walks_first_order(const double[:, ::1] cum, const int64_t[::1] last,
                      const int64_t[::1] starts, const double[:, ::1] uniforms,
                      int64_t[:, ::1] out):
    cdef Py_ssize_t n_walks = out.shape[0], length = out.shape[1]
    cdef Py_ssize_t w, s, cur
    cdef double total
    with nogil:
        for w in range(n_walks):
            cur = starts[w]
            out[w, 0] = cur
            for s in range(1, length):
                total = cum[cur, cum.shape[1] - 1]
                cur = _search(cum[cur], uniforms[w, s - 1] * total, last[cur])
                out[w, s] = cur


def walks_second_order(const double[:, ::1] weights, const double[:, ::1] cum,
                       const int64_t[::1] last, const int64_t[::1] starts,
                       const double[:, ::1] uniforms, double inv_p, double inv_q,
                       int64_t[:, ::1] out):
    cdef Py_ssize_t n_walks = out.shape[0], length = out.shape[1], n = weights.shape[0]
    cdef Py_ssize_t w, s, x, cur, prev
    cdef double acc, b, total
    cdef double[::1] buf = np.empty(n)
    with nogil:
        for w in range(n_walks):
            cur = starts[w]
            out[w, 0] = cur
            if length > 1:
                total = cum[cur, n - 1]
                prev = cur
                cur = _search(cum[cur], uniforms[w, 0] * total, last[cur])
                out[w, 1] = cur
            for s in range(2, length):
                acc = 0.0
                for x in range(n):
                    b = weights[cur, x]
                    if x == prev:
                        b = b * inv_p
                    elif weights[prev, x] <= 0.0:
                        b = b * inv_q
                    acc = acc + b
                    buf[x] = acc
                prev = cur
                cur = _search(buf, uniforms[w, s - 1] * acc, last[cur])
                out[w, s] = cur


def sgns_epoch(const int64_t[:, ::1] walks, double[:, ::1] w_in, double[:, ::1] w_out,
               const int64_t[::1] negatives, int window, int n_neg, double lr0,
               int64_t start, int64_t total):
    """One pass of skip-gram with negative sampling; returns pairs processed."""
    cdef Py_ssize_t n_walks = walks.shape[0], length = walks.shape[1], dim = w_in.shape[1]
    cdef Py_ssize_t wk, i, j, lo, hi, t, k, center, context, target
    cdef int64_t p = 0
    cdef double lr, f, g, label, frac
    cdef double[::1] neu = np.empty(dim)
    with nogil:
        for wk in range(n_walks):
            for i in range(length):
                center = walks[wk, i]
                lo = i - window
                if lo < 0:
                    lo = 0
                hi = i + window
                if hi > length - 1:
                    hi = length - 1
                for j in range(lo, hi + 1):
                    if j == i:
                        continue
                    context = walks[wk, j]
                    frac = 1.0 - (<double>(start + p)) / (<double>total)
                    if frac < 1e-4:
                        frac = 1e-4
                    lr = lr0 * frac
                    for k in range(dim):
                        neu[k] = 0.0
                    for t in range(n_neg + 1):
                        if t == 0:
                            target = context
                            label = 1.0
                        else:
                            target = negatives[p * n_neg + t - 1]
                            if target == context:
                                continue
                            label = 0.0
                        f = 0.0
                        for k in range(dim):
                            f = f + w_in[center, k] * w_out[target, k]
                        if f > 30.0:
                            f = 30.0
                        elif f < -30.0:
                            f = -30.0
                        g = (label - 1.0 / (1.0 + exp(-f))) * lr
                        for k in range(dim):
                            neu[k] = neu[k] + g * w_out[target, k]
                            w_out[target, k] = w_out[target, k] + g * w_in[center, k]
                    for k in range(dim):
                        w_in[center, k] = w_in[center, k] + neu[k]
                    p += 1
    return p
