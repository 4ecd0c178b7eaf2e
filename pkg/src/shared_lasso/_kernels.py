"""Numba kernels for the coordinate-descent inner loop.

The sweep operates on the column-major adjacency of a binary design
(`col_offsets`, `row_indices`) with per-column scale factors.  Everything
here is branch-light and allocation-free so a full sweep over the active
set costs O(nnz of swept columns).

`nogil=True` lets cross-validation folds and bootstrap replicates run the
kernel concurrently from Python threads.
"""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def cd_sweep(col_offsets, row_indices, scales, sq_norms, cols,
             beta, residual, lam_pf, n):
    """One pass of coordinate minimization over `cols`.

    Updates `beta` and `residual` in place; returns the maximum absolute
    coefficient change.  `lam_pf[j]` is lambda * penalty_factor[j]; the
    squared-error term is normalized by `n`.  Columns with zero squared
    norm are skipped (their coefficient stays 0).
    """
    max_delta = 0.0
    for idx in range(cols.shape[0]):
        j = cols[idx]
        sq = sq_norms[j]
        if sq <= 0.0:
            continue
        start = col_offsets[j]
        end = col_offsets[j + 1]
        acc = 0.0
        for k in range(start, end):
            acc += residual[row_indices[k]]
        acc *= scales[j]
        old = beta[j]
        z = acc / n + (sq / n) * old
        t = lam_pf[j]
        if z > t:
            new = (z - t) / (sq / n)
        elif z < -t:
            new = (z + t) / (sq / n)
        else:
            new = 0.0
        delta = new - old
        if delta != 0.0:
            beta[j] = new
            step = delta * scales[j]
            for k in range(start, end):
                residual[row_indices[k]] -= step
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    return max_delta
