"""Compiled row-wise kernels for batched resampling.

Each kernel works on a ``(R, N)`` block, one independent weight vector per
row, and reproduces the single-vector numpy routines in
:mod:`smc_genealogy.resampling` exactly for the same uniforms.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _search_row(cdf, total, last, u, out):
    n = cdf.shape[0]
    for j in range(u.shape[0]):
        x = u[j] * total
        lo, hi = 0, n
        while lo < hi:  # first index with cdf > x
            mid = (lo + hi) // 2
            if cdf[mid] <= x:
                lo = mid + 1
            else:
                hi = mid
        out[j] = lo if lo < n else last


@njit(cache=True)
def _walk_row(cdf, total, last, u, out):
    # same result as _search_row when u is nondecreasing
    n = cdf.shape[0]
    i = 0
    for j in range(u.shape[0]):
        x = u[j] * total
        while i < n and cdf[i] <= x:
            i += 1
        out[j] = i if i < n else last


@njit(cache=True)
def inverse_cdf_rows(w, u, sorted_u=False):
    """Row ``r`` of the result is ``inverse_cdf(w[r], u[r])``.

    With ``sorted_u`` every row of ``u`` must be nondecreasing and a linear
    merge replaces the binary searches.
    """
    rows, n = w.shape
    out = np.empty(u.shape, dtype=np.int64)
    cdf = np.empty(n)
    for r in range(rows):
        acc = 0.0
        last = 0
        for i in range(n):
            acc += w[r, i]
            cdf[i] = acc
            if w[r, i] > 0:
                last = i
        if sorted_u:
            _walk_row(cdf, cdf[n - 1], last, u[r], out[r])
        else:
            _search_row(cdf, cdf[n - 1], last, u[r], out[r])
    return out


@njit(cache=True)
def residual_rows(w, u):
    """Residual resampling per row; ``u[r, :k]`` fills the ``k`` remainder slots."""
    rows, n = w.shape
    out = np.empty((rows, n), dtype=np.int64)
    counts = np.empty(n, dtype=np.int64)
    residual = np.empty(n)
    cdf = np.empty(n)
    picks = np.empty(n, dtype=np.int64)
    for r in range(rows):
        placed = 0
        for i in range(n):
            scaled = n * w[r, i]
            counts[i] = np.int64(np.floor(scaled))
            residual[i] = scaled - counts[i]
            placed += counts[i]
        rest = n - placed
        if rest > 0:
            total = residual.sum()
            acc = 0.0
            last = 0
            for i in range(n):
                acc += residual[i] / total
                cdf[i] = acc
                if residual[i] > 0:
                    last = i
            _search_row(cdf, cdf[n - 1], last, u[r, :rest], picks[:rest])
            for j in range(rest):
                counts[picks[j]] += 1
        k = 0
        for i in range(n):
            for _ in range(counts[i]):
                out[r, k] = i
                k += 1
    return out
