# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops for orbit statistics and chain sampling.

Every function mirrors ``_pykernels`` operation for operation, so the two
backends agree bit for bit on IEEE-754 hardware.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, log

cnp.import_array()


def gauss_digits(double x, Py_ssize_t n):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] digits = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] d = digits
    cdef Py_ssize_t k = 0
    cdef double inv, a
    with nogil:
        while k < n and x != 0.0:
            inv = 1.0 / x
            a = floor(inv)
            d[k] = <cnp.int64_t>a
            x = inv - a
            k += 1
    return digits[:k], x


def dl_counts(double x, double y, Py_ssize_t n, edges):
    cdef double[::1] e = np.ascontiguousarray(edges, dtype=np.float64)
    cdef Py_ssize_t m = e.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] hist = np.zeros(m + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] h = hist
    cdef Py_ssize_t k = 0, lo, hi, mid
    cdef double inv, a, theta
    with nogil:
        while k < n:
            inv = 1.0 / x
            a = floor(inv)
            x = inv - a
            y = 1.0 / (a + y)
            if x == 0.0:
                break
            theta = x / (1.0 + x * y)
            lo = 0
            hi = m
            while lo < hi:
                mid = (lo + hi) // 2
                if e[mid] < theta:
                    lo = mid + 1
                else:
                    hi = mid
            h[lo] += 1
            k += 1
    return hist, x, y, k


def gauss_log_derivative_sum(double x, Py_ssize_t n):
    cdef double total = 0.0, inv
    cdef Py_ssize_t k = 0
    with nogil:
        while k < n and x != 0.0:
            inv = 1.0 / x
            total += 2.0 * log(inv)
            x = inv - floor(inv)
            k += 1
    return total, x, k


def markov_sample(indptr, indices, cum, Py_ssize_t start, u):
    cdef cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef double[::1] c = np.ascontiguousarray(cum, dtype=np.float64)
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = uu.shape[0] + 1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] states = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] st = states
    cdef Py_ssize_t s = start, k, lo, hi, mid
    cdef double v
    st[0] = s
    with nogil:
        for k in range(1, n):
            lo = ip[s]
            hi = ip[s + 1] - 1
            v = uu[k - 1]
            while lo < hi:
                mid = (lo + hi) // 2
                if c[mid] < v:
                    lo = mid + 1
                else:
                    hi = mid
            s = ix[lo]
            st[k] = s
    return states


def backward_tails(digits):
    cdef cnp.int64_t[::1] d = np.ascontiguousarray(digits, dtype=np.int64)
    cdef Py_ssize_t n = d.shape[0], k
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double t = 0.0
    with nogil:
        for k in range(n - 1, -1, -1):
            t = 1.0 / (<double>d[k] + t)
            o[k] = t
    return out


def forward_pasts(digits):
    cdef cnp.int64_t[::1] d = np.ascontiguousarray(digits, dtype=np.int64)
    cdef Py_ssize_t n = d.shape[0], k
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double v = 0.0
    with nogil:
        for k in range(n):
            v = 1.0 / (<double>d[k] + v)
            o[k] = v
    return out
