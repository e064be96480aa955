# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled alternating-demeaning kernel.

Hot loop of the fixed-effects absorption step; called once per fit, so it
dominates Monte Carlo and rolling-window runtimes. The NumPy fallback in
``_demean_py`` uses the same accumulation order and must stay numerically
identical.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def demean(double[:, ::1] data, long long[:, ::1] codes, long long[:] levels,
           double tol, long max_iter):
    """See ``searise._demean_py.demean``; identical contract."""
    cdef Py_ssize_t n = data.shape[0]
    cdef Py_ssize_t k = data.shape[1]
    cdef Py_ssize_t g = codes.shape[1]
    cdef Py_ssize_t i, j, c, lv
    cdef Py_ssize_t max_levels = 0
    for j in range(g):
        if levels[j] > max_levels:
            max_levels = levels[j]

    counts_arr = np.zeros((g, max_levels), dtype=np.float64)
    cdef double[:, ::1] counts = counts_arr
    for j in range(g):
        for i in range(n):
            counts[j, codes[i, j]] += 1.0

    means_arr = np.empty((max_levels, k), dtype=np.float64)
    cdef double[:, ::1] means = means_arr

    cdef double sweep_max = np.inf
    cdef double m, v
    cdef long it
    for it in range(1, max_iter + 1):
        sweep_max = 0.0
        for j in range(g):
            lv = levels[j]
            # accumulate column-major to match np.bincount's row order per column
            for c in range(k):
                for i in range(lv):
                    means[i, c] = 0.0
                for i in range(n):
                    means[codes[i, j], c] += data[i, c]
            for c in range(k):
                for i in range(lv):
                    means[i, c] /= counts[j, i]
            for i in range(n):
                for c in range(k):
                    data[i, c] -= means[codes[i, j], c]
            m = 0.0
            for i in range(lv):
                for c in range(k):
                    v = means[i, c]
                    if v < 0.0:
                        v = -v
                    if v > m:
                        m = v
            if m > sweep_max:
                sweep_max = m
        if sweep_max < tol:
            return it, sweep_max, True
    return max_iter, sweep_max, False
