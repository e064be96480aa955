"""NumPy fallback for the alternating-demeaning kernel.

Mirrors the compiled kernel in ``_demean_cy.pyx`` operation for operation
(same accumulation order) so both backends produce identical floats.
"""

from __future__ import annotations

import numpy as np


def demean(data: np.ndarray, codes: np.ndarray, levels: np.ndarray,
           tol: float, max_iter: int) -> tuple[int, float, bool]:
    """Alternately subtract within-group means from ``data`` in place.

    data : (n, k) float64, modified in place.
    codes : (n, g) int64 group codes, each column in 0..levels[j]-1.
    levels : (g,) int64 level counts per group.

    One iteration is a full sweep over all groups. Stops when the largest
    subtracted mean in a sweep is below ``tol``. Returns
    ``(iterations, last_sweep_change, converged)``.
    """
    n, k = data.shape
    g = codes.shape[1]
    counts = [
        np.bincount(codes[:, j], minlength=int(levels[j])).astype(np.float64)
        for j in range(g)
    ]
    sweep_max = np.inf
    for it in range(1, max_iter + 1):
        sweep_max = 0.0
        for j in range(g):
            cj = codes[:, j]
            lj = int(levels[j])
            means = np.empty((lj, k))
            for c in range(k):
                means[:, c] = np.bincount(cj, weights=data[:, c], minlength=lj)
            means /= counts[j][:, None]
            data -= means[cj]
            m = float(np.abs(means).max())
            if m > sweep_max:
                sweep_max = m
        if sweep_max < tol:
            return it, sweep_max, True
    return max_iter, sweep_max, False
