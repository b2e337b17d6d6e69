"""Resampling schemes.

Every scheme maps a normalized weight vector of length ``N`` to an ancestor
vector: ``N`` zero-based parent indices, one per offspring. Offspring counts
always total ``N``.

multinomial
    ``N`` independent categorical draws.
residual
    ``floor(N w_i)`` deterministic copies of particle ``i``; the remaining
    ``R = N - sum floor(N w_i)`` offspring are drawn multinomially from the
    residual weights ``N w_i - floor(N w_i)``.
stratified
    Inverse CDF at ``(k + U_k) / N``, one independent uniform per stratum.
systematic
    Inverse CDF at ``(k + U) / N`` with a single shared uniform.

Residual, stratified and systematic return ancestors sorted by parent, which
is far from exchangeable. :func:`resample` composes any scheme with a uniform
random permutation of the ancestor vector so that, given the offspring
counts, every consistent arrangement is equally likely.

Categorical draws search the cumulative weights with a binary search. A zero
weight spans an empty interval of the CDF and is never selected.
"""

import numpy as np

from . import _kernels
from .errors import InputError

WEIGHT_TOLERANCE = 1e-12
PERMUTE_MODES = ("on", "off", "auto")


def check_weights(w):
    """Validate a weight vector and return it renormalized as float64."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise InputError("weights must be a nonempty 1-d array")
    if not np.all(np.isfinite(w)):
        raise InputError("weights must be finite")
    if np.any(w < 0):
        raise InputError("weights must be nonnegative")
    total = w.sum()
    if abs(total - 1.0) > WEIGHT_TOLERANCE:
        raise InputError(f"weights must sum to 1 (got {total!r})")
    return w / total


def check_ancestors(a, n=None):
    a = np.asarray(a)
    if a.ndim != 1 or a.size < 1:
        raise InputError("ancestors must be a nonempty 1-d array")
    if not np.issubdtype(a.dtype, np.integer):
        raise InputError("ancestors must be integers")
    n = a.size if n is None else n
    if a.min() < 0 or a.max() >= n:
        raise InputError(f"ancestor indices must lie in [0, {n})")
    return a


def inverse_cdf(w, u):
    """Map points ``u`` in [0, 1) to particle indices through the CDF of ``w``."""
    cdf = np.cumsum(w)
    idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    if idx.size and idx.max() >= w.size:
        # u * total rounded up to the total; fall back to the last positive weight
        last = np.flatnonzero(w)[-1]
        idx = np.minimum(idx, last)
    return idx


def _multinomial(w, rng):
    return inverse_cdf(w, rng.random(w.size))


def _residual(w, rng):
    n = w.size
    scaled = n * w
    counts = np.floor(scaled).astype(np.int64)
    rest = n - int(counts.sum())
    if rest > 0:
        residual = scaled - counts
        residual /= residual.sum()
        counts += np.bincount(inverse_cdf(residual, rng.random(rest)), minlength=n)
    return np.repeat(np.arange(n), counts)


def _stratified(w, rng):
    n = w.size
    return inverse_cdf(w, (np.arange(n) + rng.random(n)) / n)


def _systematic(w, rng):
    n = w.size
    return inverse_cdf(w, (np.arange(n) + rng.random()) / n)


def resample_multinomial(w, rng):
    """Multinomial resampling: ``N`` iid draws from ``Categorical(w)``."""
    return _multinomial(check_weights(w), rng)


def resample_residual(w, rng):
    """Residual resampling, remainder filled multinomially. Output sorted by parent."""
    return _residual(check_weights(w), rng)


def resample_stratified(w, rng):
    """Stratified resampling. Output sorted by parent."""
    return _stratified(check_weights(w), rng)


def resample_systematic(w, rng):
    """Systematic resampling with a single uniform offset. Output sorted by parent."""
    return _systematic(check_weights(w), rng)


def permute_ancestors(a, rng):
    """Return ``a`` rearranged by a uniformly random permutation."""
    a = check_ancestors(a)
    return a[rng.permutation(a.size)]


SCHEMES = {
    "multinomial": _multinomial,
    "residual": _residual,
    "stratified": _stratified,
    "systematic": _systematic,
}


def check_scheme(scheme, permute="auto"):
    if scheme not in SCHEMES:
        raise InputError(f"unknown resampling scheme {scheme!r}; choose from {sorted(SCHEMES)}")
    if permute not in PERMUTE_MODES and not isinstance(permute, bool):
        raise InputError(f"permute must be one of {PERMUTE_MODES}, got {permute!r}")


def permutes(scheme, permute="auto"):
    """Whether ``scheme`` is wrapped in a random permutation under ``permute``.

    ``auto`` permutes every scheme except multinomial, which is exchangeable.
    """
    if isinstance(permute, bool):
        return permute
    if permute == "auto":
        return scheme != "multinomial"
    return permute == "on"


def resampler(scheme, permute="auto"):
    """Return ``f(w, rng) -> ancestors`` for ``scheme`` without input validation.

    Used by the engine, which already guarantees normalized weights.
    """
    check_scheme(scheme, permute)
    base = SCHEMES[scheme]
    if not permutes(scheme, permute):
        return base

    def wrapped(w, rng):
        a = base(w, rng)
        return a[rng.permutation(a.size)]

    return wrapped


def resample(w, rng, scheme="multinomial", permute="auto"):
    """Validate ``w`` and resample it with ``scheme``."""
    return resampler(scheme, permute)(check_weights(w), rng)


def check_weight_rows(w):
    """Validate a ``(R, N)`` block of weight vectors; rows are renormalized."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[1] < 1:
        raise InputError("weight rows must form a nonempty 2-d array")
    for row in w:
        check_weights(row)
    return w / w.sum(axis=1, keepdims=True)


def _multinomial_rows(w, rng):
    return _kernels.inverse_cdf_rows(w, rng.random(w.shape))


def _residual_rows(w, rng):
    return _kernels.residual_rows(w, rng.random(w.shape))


def _stratified_rows(w, rng):
    n = w.shape[1]
    return _kernels.inverse_cdf_rows(w, (np.arange(n) + rng.random(w.shape)) / n, True)


def _systematic_rows(w, rng):
    n = w.shape[1]
    return _kernels.inverse_cdf_rows(w, (np.arange(n) + rng.random((w.shape[0], 1))) / n, True)


ROW_SCHEMES = {
    "multinomial": _multinomial_rows,
    "residual": _residual_rows,
    "stratified": _stratified_rows,
    "systematic": _systematic_rows,
}


def row_resampler(scheme, permute="auto"):
    """Batched counterpart of :func:`resampler` for ``(R, N)`` weight blocks.

    Rows are resampled independently with the same law as the single-vector
    scheme; the permutation wrapper shuffles every row independently.
    """
    check_scheme(scheme, permute)
    base = ROW_SCHEMES[scheme]
    if not permutes(scheme, permute):
        return base

    def wrapped(w, rng):
        return rng.permuted(base(w, rng), axis=1)

    return wrapped


def resample_rows(w, rng, scheme="multinomial", permute="auto"):
    """Validate a block of weight rows and resample each row with ``scheme``."""
    return row_resampler(scheme, permute)(check_weight_rows(w), rng)
