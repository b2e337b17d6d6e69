"""Reverse-time genealogies of a particle history.

Time runs backwards here: reverse generation 0 is the final generation of
the run (the leaves) and reverse generation ``s`` is forward generation
``T - s``. The offspring counts of reverse generation ``s`` are the counts of
``history.ancestors[T - s]``, and every series below is indexed by ``s`` with
a zero entry at ``s = 0``.

For offspring counts ``nu`` of ``N`` particles the pair coalescence
probability and the multiple-merger bound of one generation are

    c = sum_i (nu_i)_2 / (N)_2
    D = sum_i (nu_i)_2 (nu_i + (sum_{j != i} nu_j^2) / N) / (N (N)_2)

and the time change ``tau(t)`` is the first reverse generation ``s >= 1`` at
which ``C(s) = c(1) + ... + c(s)`` reaches ``t``.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import HorizonExhaustedError, InputError, SizeGuardError
from .partitions import MAX_PARTITION_SIZE, Partition, _partitions, enumerate_partitions

__all__ = [
    "Partition", "falling_factorial", "offspring_counts", "c_n_stat", "d_n_stat",
    "CoalescenceSeries", "time_change", "GenealogyTrace", "Censored", "trace_genealogy",
    "tree_height", "rescaled_height", "transition_probability", "transition_matrix_given_counts",
    "batch_transition_matrices",
]


def falling_factorial(x, b):
    """``x (x - 1) ... (x - b + 1)``; the empty product is 1."""
    if int(b) != b or b < 0:
        raise InputError(f"falling factorial order must be a nonnegative integer, got {b!r}")
    out = 1
    for k in range(int(b)):
        out *= x - k
    return out


def _falling(values, b):
    out = np.ones_like(values)
    for k in range(b):
        out = out * (values - k)
    return out


def offspring_counts(ancestors, num_particles=None):
    """Number of offspring of each parent in one ancestor vector."""
    a = np.asarray(ancestors)
    n = a.size if num_particles is None else int(num_particles)
    if a.ndim != 1 or a.size == 0 or not np.issubdtype(a.dtype, np.integer):
        raise InputError("ancestors must be a nonempty 1-d integer array")
    if a.min() < 0 or a.max() >= n:
        raise InputError(f"ancestor indices must lie in [0, {n})")
    return np.bincount(a, minlength=n)


def _check_counts(nu):
    nu = np.asarray(nu)
    if nu.ndim != 1 or not np.issubdtype(nu.dtype, np.integer):
        raise InputError("offspring counts must be a 1-d integer array")
    n = nu.size
    if n < 2:
        raise InputError("need N >= 2 particles")
    if nu.min() < 0 or nu.sum() != n:
        raise InputError(f"offspring counts must be nonnegative and sum to N = {n}")
    return nu.astype(np.int64)


def _pair_sum(nu):
    return int(np.dot(nu, nu - 1))


def c_n_stat(nu):
    """Probability that two distinct lineages share a parent given counts ``nu``."""
    nu = _check_counts(nu)
    n = nu.size
    return _pair_sum(nu) / (n * (n - 1))


def d_n_stat(nu):
    """Upper bound on the probability of a merger of more than two lineages."""
    nu = _check_counts(nu)
    n = nu.size
    pairs = nu * (nu - 1)
    squares = nu * nu
    inner = n * nu + (int(squares.sum()) - squares)
    # integer numerator over N^2 (N)_2 keeps the value exact up to one rounding
    return int(np.dot(pairs, inner)) / (n * n * n * (n - 1))


def _compensated_cumsum(values):
    out = np.empty(len(values))
    total = 0.0
    comp = 0.0
    for k, v in enumerate(values):
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
        out[k] = total + comp
    return out


@dataclass(frozen=True)
class CoalescenceSeries:
    """Per reverse generation statistics ``c``, ``D`` and ``C``.

    All arrays have length ``T + 1``; entry ``s`` belongs to reverse
    generation ``s`` and entry 0 is zero.
    """

    c: np.ndarray
    d: np.ndarray
    cumulative: np.ndarray
    num_particles: Optional[int] = None

    @property
    def horizon(self):
        return self.c.size - 1

    @classmethod
    def from_counts(cls, counts):
        """Build from a ``(T, N)`` array whose row ``s - 1`` holds the counts of reverse generation ``s``."""
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 2:
            raise InputError("counts must be a 2-d array")
        horizon, n = counts.shape
        if n < 2:
            raise InputError("need N >= 2 particles")
        if (counts < 0).any() or (counts.sum(axis=1) != n).any():
            raise InputError("every row of counts must be nonnegative and sum to N")
        pairs = np.einsum("ij,ij->i", counts, counts - 1)
        squares = counts * counts
        inner = n * counts + (squares.sum(axis=1, keepdims=True) - squares)
        d_num = np.einsum("ij,ij->i", counts * (counts - 1), inner)
        c = np.zeros(horizon + 1)
        d = np.zeros(horizon + 1)
        cum = np.zeros(horizon + 1)
        denom = n * (n - 1)
        c[1:] = pairs / denom
        d[1:] = d_num / (n * n * denom)
        # integer running sum, one rounding per entry
        cum[1:] = np.cumsum(pairs) / denom
        return cls(c, d, cum, n)

    @classmethod
    def from_ancestors(cls, ancestors):
        """Build from a forward ``(T, N)`` ancestor matrix."""
        ancestors = np.asarray(ancestors)
        horizon, n = ancestors.shape
        offsets = (np.arange(horizon)[::-1] * n)[:, None]
        counts = np.bincount((ancestors + offsets).ravel(), minlength=horizon * n).reshape(horizon, n)
        return cls.from_counts(counts)

    @classmethod
    def from_history(cls, history):
        return cls.from_ancestors(history.ancestors)

    @classmethod
    def from_rates(cls, c, d=None):
        """Build from explicit rates ``c(1), ..., c(T)`` (and optionally ``D``)."""
        c = np.asarray(c, dtype=float)
        d = np.zeros_like(c) if d is None else np.asarray(d, dtype=float)
        if c.ndim != 1 or c.shape != d.shape:
            raise InputError("c and d must be 1-d arrays of equal length")
        if (c < 0).any() or (c > 1).any():
            raise InputError("coalescence rates must lie in [0, 1]")
        pad = np.zeros(1)
        return cls(np.concatenate([pad, c]), np.concatenate([pad, d]),
                   np.concatenate([pad, _compensated_cumsum(c)]))

    def time_change(self, t):
        return time_change(self, t)


def time_change(series, t):
    """Smallest ``s >= 1`` with ``C(s) >= t``.

    Raises :class:`HorizonExhaustedError` (carrying the achieved ``C(T)``)
    when the recorded series never reaches ``t``.
    """
    if not (np.isfinite(t) and t > 0):
        raise InputError(f"time must be positive and finite, got {t!r}")
    cum = series.cumulative
    if cum.size < 2 or cum[-1] < t:
        raise HorizonExhaustedError(t, float(cum[-1]) if cum.size else 0.0)
    return int(np.searchsorted(cum[1:], t, side="left")) + 1


def _time_changes(cum, times):
    """Vectorized time change for nondecreasing ``cum`` (index 0 = 0); -1 when exhausted."""
    times = np.asarray(times, dtype=float)
    s = np.searchsorted(cum[1:], times, side="left") + 1
    s = np.where(times <= 0, 0, s)
    return np.where(s > cum.size - 1, -1, s)


@dataclass(frozen=True)
class Censored:
    """Marker for a genealogy whose MRCA lies beyond the recorded horizon."""

    horizon: int

    def __bool__(self):
        return False


@dataclass(frozen=True)
class GenealogyTrace:
    """Lineages of ``n`` leaves traced back in time.

    ``lineages[s, k]`` is the particle index (in forward generation ``T - s``)
    of the ancestor of leaf ``k`` at reverse generation ``s``. Tracing stops
    at the MRCA; ``mrca`` is ``None`` if the horizon was hit first.
    """

    leaves: tuple
    lineages: np.ndarray
    mrca: Optional[int]
    horizon: int

    @property
    def n(self):
        return len(self.leaves)

    @property
    def censored(self):
        return self.mrca is None

    @property
    def generations(self):
        """Number of recorded reverse generations after generation 0."""
        return self.lineages.shape[0] - 1

    def num_blocks(self):
        """Block count of the partition at every recorded reverse generation."""
        srt = np.sort(self.lineages, axis=1)
        return 1 + (np.diff(srt, axis=1) != 0).sum(axis=1)

    def partition(self, s):
        """Partition of the leaves ``1..n`` at reverse generation ``s``."""
        if s < 0:
            raise InputError("reverse generation must be >= 0")
        if s > self.generations:
            if self.mrca is not None:
                return Partition.trivial(self.n)
            raise HorizonExhaustedError(s, self.generations)
        return Partition.from_labels(self.lineages[s].tolist())

    def partitions(self):
        return [self.partition(s) for s in range(self.generations + 1)]


def trace_genealogy(history, leaves):
    """Trace the ancestry of ``leaves`` (indices into the final generation).

    ``history`` is a :class:`~smc_genealogy.engine.ParticleHistory` or a
    forward ``(T, N)`` ancestor matrix.
    """
    ancestors = np.asarray(getattr(history, "ancestors", history))
    if ancestors.ndim != 2:
        raise InputError("ancestors must be a (T, N) matrix")
    horizon, n_particles = ancestors.shape
    leaves = tuple(int(x) for x in leaves)
    if len(leaves) == 0 or len(set(leaves)) != len(leaves):
        raise InputError("leaves must be distinct and nonempty")
    if min(leaves) < 0 or max(leaves) >= n_particles:
        raise InputError(f"leaf indices must lie in [0, {n_particles})")
    current = np.array(leaves, dtype=np.int64)
    rows = [current]
    mrca = 0 if len(leaves) == 1 else None
    if mrca is None:
        for s in range(1, horizon + 1):
            current = ancestors[horizon - s][current]
            rows.append(current)
            if current.min() == current.max():
                mrca = s
                break
    return GenealogyTrace(leaves, np.array(rows), mrca, horizon)


def tree_height(trace):
    """Reverse generations from the leaves to their MRCA, or :class:`Censored`."""
    if trace.mrca is None:
        return Censored(trace.horizon)
    return trace.mrca


def rescaled_height(trace, series):
    """Height in coalescent time units, ``C(MRCA generation)``."""
    if trace.mrca is None:
        return Censored(trace.horizon)
    return float(series.cumulative[trace.mrca])


def _block_sum(nu, orders):
    # sum_i prod_k (nu_i)_{b_k} over one block of positions
    term = np.ones_like(nu)
    for b in orders:
        term = term * _falling(nu, b)
    return int(term.sum())


def _distinct_tuple_sum(nu, orders, cache):
    """``sum over distinct (i_1..i_m) of prod_k (nu_{i_k})_{b_k}`` by Moebius inversion.

    The sum over all tuples factorizes; restricting to distinct tuples is
    inclusion-exclusion over the lattice of set partitions of the ``m``
    positions with Moebius weights ``prod_B (-1)^{|B|-1} (|B|-1)!``.
    """
    m = len(orders)
    total = 0
    for pi in _partitions(m):
        weight = 1
        prod = 1
        for block in pi.blocks:
            weight *= (-1) ** (len(block) - 1) * math.factorial(len(block) - 1)
            key = tuple(sorted(orders[k - 1] for k in block))
            if key not in cache:
                cache[key] = _block_sum(nu, key)
            prod *= cache[key]
        total += weight * prod
    return total


def _counts_for_products(nu, size):
    nu = _check_counts(nu)
    n = nu.size
    # int64 is exact while N^(size+1) stays below 2^62
    if (size + 1) * math.log2(max(n, 2)) >= 62:
        return nu.astype(object)
    return nu


def transition_probability(nu, xi, eta, _cache=None):
    """Conditional probability of the genealogy moving from ``xi`` to ``eta`` given counts ``nu``.

    ``eta`` must be a coarsening of ``xi`` (otherwise 0 is returned); with
    ``b_k`` blocks of ``xi`` merged into block ``k`` of ``eta`` the value is

        sum over distinct parents (i_1..i_|eta|) of prod_k (nu_{i_k})_{b_k}, divided by (N)_{|xi|}.
    """
    if not isinstance(xi, Partition) or not isinstance(eta, Partition):
        raise InputError("xi and eta must be Partition instances")
    if len(xi) > MAX_PARTITION_SIZE:
        raise SizeGuardError(f"|xi| is limited to {MAX_PARTITION_SIZE}")
    nu = np.asarray(nu)
    if len(xi) > nu.size:
        raise InputError(f"|xi| = {len(xi)} exceeds N = {nu.size}")
    nu = _counts_for_products(nu, len(xi))
    sizes = eta.merge_sizes(xi)
    if sizes is None:
        return 0.0
    cache = {} if _cache is None else _cache
    num = _distinct_tuple_sum(nu, sizes, cache)
    return int(num) / falling_factorial(nu.size, len(xi))


def transition_matrix_given_counts(nu, n):
    """Matrix of :func:`transition_probability` over ``enumerate_partitions(n)``."""
    parts = enumerate_partitions(n)
    nu = _counts_for_products(np.asarray(nu), n)
    if n > nu.size:
        raise InputError(f"n = {n} exceeds N = {nu.size}")
    cache = {}
    out = np.zeros((len(parts), len(parts)))
    for i, xi in enumerate(parts):
        for j, eta in enumerate(parts):
            sizes = eta.merge_sizes(xi)
            if sizes is not None:
                out[i, j] = int(_distinct_tuple_sum(nu, sizes, cache)) / falling_factorial(nu.size, len(xi))
    return out


def batch_transition_matrices(counts, n):
    """:func:`transition_matrix_given_counts` for many count vectors at once, ``n <= 3``.

    ``counts`` has shape ``(r, N)``; the result has shape ``(r, B, B)`` with
    ``B`` the Bell number of ``n``. Uses the closed forms for at most three
    lineages; larger ``n`` should go through the general routine.
    """
    counts = np.asarray(counts, dtype=np.int64)
    r, big_n = counts.shape
    if n == 1:
        return np.ones((r, 1, 1))
    pair_sum = np.einsum("ij,ij->i", counts, counts - 1).astype(float)
    c = pair_sum / (big_n * (big_n - 1))
    if n == 2:
        out = np.zeros((r, 2, 2))
        out[:, 0, 0] = 1.0 - c
        out[:, 0, 1] = c
        out[:, 1, 1] = 1.0
        return out
    if n != 3:
        raise SizeGuardError("batch_transition_matrices supports n <= 3")
    # partitions of [3]: {1}{2}{3}, {1}{2,3}, {1,3}{2}, {1,2}{3}, {1,2,3}
    fall2 = counts * (counts - 1)
    triple = np.einsum("ij,ij->i", fall2, counts - 2).astype(float)
    # sum over i != j of (nu_i)_2 nu_j
    one_pair = (big_n * pair_sum - np.einsum("ij,ij->i", fall2, counts)).astype(float)
    denom3 = float(big_n * (big_n - 1) * (big_n - 2))
    out = np.zeros((r, 5, 5))
    out[:, 0, 1:4] = (one_pair / denom3)[:, None]
    out[:, 0, 4] = triple / denom3
    out[:, 0, 0] = 1.0 - 3.0 * one_pair / denom3 - triple / denom3
    for k in (1, 2, 3):
        out[:, k, k] = 1.0 - c
        out[:, k, 4] = c
    out[:, 4, 4] = 1.0
    return out
