"""Pure-Python reference kernels.

Same signatures and floating-point operation order as the compiled module
``_ckernels``; used when the extension is not built.
"""
import math

import numpy as np


def gauss_digits(x, n):
    digits = np.empty(n, dtype=np.int64)
    k = 0
    while k < n and x != 0.0:
        inv = 1.0 / x
        a = math.floor(inv)
        digits[k] = a
        x = inv - a
        k += 1
    return digits[:k], x


def dl_counts(x, y, n, edges):
    edges = [float(e) for e in edges]
    m = len(edges)
    hist = np.zeros(m + 1, dtype=np.int64)
    k = 0
    while k < n:
        inv = 1.0 / x
        a = math.floor(inv)
        x = inv - a
        y = 1.0 / (a + y)
        if x == 0.0:
            break
        theta = x / (1.0 + x * y)
        lo, hi = 0, m
        while lo < hi:
            mid = (lo + hi) // 2
            if edges[mid] < theta:
                lo = mid + 1
            else:
                hi = mid
        hist[lo] += 1
        k += 1
    return hist, x, y, k


def gauss_log_derivative_sum(x, n):
    total = 0.0
    k = 0
    while k < n and x != 0.0:
        inv = 1.0 / x
        total += 2.0 * math.log(inv)
        x = inv - math.floor(inv)
        k += 1
    return total, x, k


def markov_sample(indptr, indices, cum, start, u):
    n = len(u) + 1
    states = np.empty(n, dtype=np.int64)
    s = int(start)
    states[0] = s
    for k in range(1, n):
        lo = int(indptr[s])
        hi = int(indptr[s + 1]) - 1
        v = u[k - 1]
        while lo < hi:
            mid = (lo + hi) // 2
            if cum[mid] < v:
                lo = mid + 1
            else:
                hi = mid
        s = int(indices[lo])
        states[k] = s
    return states


def backward_tails(digits):
    n = len(digits)
    out = np.empty(n, dtype=np.float64)
    t = 0.0
    for k in range(n - 1, -1, -1):
        t = 1.0 / (digits[k] + t)
        out[k] = t
    return out


def forward_pasts(digits):
    n = len(digits)
    out = np.empty(n, dtype=np.float64)
    v = 0.0
    for k in range(n):
        v = 1.0 / (digits[k] + v)
        out[k] = v
    return out
