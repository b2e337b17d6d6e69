"""The Kingman n-coalescent.

Starting from ``n`` singleton blocks, every pair of blocks merges at rate 1,
so with ``k`` blocks the next merger happens after an ``Exp(k (k - 1) / 2)``
holding time and joins a uniformly chosen pair. The tree height is
``T_n = S_n + ... + S_2`` with independent ``S_k ~ Exp(binom(k, 2))``; hence

    E[T_n] = 2 (1 - 1/n),    Var[T_n] = sum_{k=2}^n binom(k, 2)^{-2} -> 4 pi^2 / 3 - 12.

Exact finite-dimensional laws come from the generator ``Q`` over the
partitions of ``[n]`` (see :func:`build_generator`) and ``exp(Q t)``.
"""

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, SizeGuardError
from .partitions import Partition, _rgs_table, enumerate_partitions

EXPM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CoalescentRealization:
    """One coalescent tree.

    ``waiting_times[j]`` is the holding time while ``n - j`` blocks remain, so
    the first entry is ``S_n`` and the last is ``S_2``. ``path[j]`` is the
    partition right after ``j`` mergers.
    """

    waiting_times: np.ndarray
    path: tuple

    @property
    def n(self):
        return self.path[0].n

    @property
    def height(self):
        return float(self.waiting_times.sum())

    @property
    def event_times(self):
        return np.cumsum(self.waiting_times)

    def partition_at(self, t):
        """Partition at coalescent time ``t``."""
        return self.path[int(np.searchsorted(self.event_times, t, side="right"))]


@dataclass(frozen=True)
class GeneratorMatrix:
    """Kingman generator over ``enumerate_partitions(n)``."""

    matrix: np.ndarray
    partitions: tuple

    @property
    def n(self):
        return self.partitions[0].n

    def labels(self):
        return [p.label() for p in self.partitions]


def _check_n(n, low=2):
    if int(n) != n or n < low:
        raise InputError(f"n must be an integer >= {low}, got {n!r}")
    return int(n)


def simulate_coalescent(n, rng):
    """Simulate the coalescent on ``n`` leaves until the MRCA."""
    n = _check_n(n)
    blocks = [[i] for i in range(1, n + 1)]
    waits = np.empty(n - 1)
    path = [Partition(blocks)]
    for j, k in enumerate(range(n, 1, -1)):
        waits[j] = rng.exponential(1.0 / (k * (k - 1) / 2))
        pair = rng.integers(k * (k - 1) // 2)
        a, b = _pairs(k)[pair]
        merged = blocks[a] + blocks[b]
        blocks = [blk for idx, blk in enumerate(blocks) if idx not in (a, b)] + [merged]
        path.append(Partition(blocks))
    return CoalescentRealization(waits, tuple(path))


_PAIR_CACHE = {}


def _pairs(k):
    if k not in _PAIR_CACHE:
        _PAIR_CACHE[k] = np.array(list(itertools.combinations(range(k), 2)), dtype=np.int64)
    return _PAIR_CACHE[k]


def sample_tree_heights(n, size, rng, chunk=100_000):
    """Draw ``size`` independent copies of ``T_n``."""
    n = _check_n(n)
    k = np.arange(n, 1, -1)
    scale = 2.0 / (k * (k - 1))
    out = np.empty(int(size))
    for start in range(0, out.size, chunk):
        stop = min(start + chunk, out.size)
        out[start:stop] = rng.standard_exponential((stop - start, n - 1)) @ scale
    return out


def sample_partitions_at(n, times, size, rng):
    """Canonical partition indices of ``size`` coalescents at each of ``times``.

    Returns an integer array of shape ``(size, len(times))`` indexing
    :func:`enumerate_partitions`. Vectorized over replicates; ``n <= 6``.
    """
    n = _check_n(n, 1)
    if n > 6:
        raise SizeGuardError("sample_partitions_at supports n <= 6")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    size = int(size)
    labels = np.tile(np.arange(n), (size, 1))
    states = [labels]
    event_times = np.zeros((size, 0))
    clock = np.zeros(size)
    for k in range(n, 1, -1):
        clock = clock + rng.exponential(2.0 / (k * (k - 1)), size)
        event_times = np.column_stack([event_times, clock])
        ij = _pairs(k)[rng.integers(k * (k - 1) // 2, size=size)]
        i, j = ij[:, :1], ij[:, 1:]
        labels = np.where(labels == j, i, labels)
        labels = np.where(labels > j, labels - 1, labels)
        states.append(labels)
    lookup = _rgs_table(n)
    powers = n ** np.arange(n)
    codes = np.stack([lookup[s @ powers] for s in states], axis=1)
    events = (event_times[:, None, :] <= times[None, :, None]).sum(axis=2)
    return np.take_along_axis(codes, events, axis=1)


def height_moments(n):
    """Exact mean and variance of ``T_n``."""
    n = _check_n(n)
    mean = 2.0 * (1.0 - 1.0 / n)
    k = np.arange(2, n + 1, dtype=float)
    rates = k * (k - 1) / 2
    variance = float(np.sum(1.0 / rates[::-1] ** 2))
    return mean, variance


def build_generator(n):
    """Generator of the Kingman coalescent on the partitions of ``[n]``, ``2 <= n <= 6``."""
    if int(n) != n or not 2 <= n <= 6:
        raise SizeGuardError(f"build_generator needs 2 <= n <= 6, got {n!r}")
    parts = enumerate_partitions(n)
    q = np.zeros((len(parts), len(parts)))
    for i, xi in enumerate(parts):
        k = len(xi)
        for j, eta in enumerate(parts):
            if len(eta) == k - 1 and eta.is_coarsening_of(xi):
                q[i, j] = 1.0
        q[i, i] = -k * (k - 1) / 2
    return GeneratorMatrix(q, tuple(parts))


def transition_matrix(q, t):
    """``exp(Q t)`` by scaling and squaring of a truncated Taylor series.

    The scaled matrix has 1-norm at most 0.5 and the series stops once a
    term's largest entry falls below 1e-12. Rounding noise outside [0, 1] is
    clipped.
    """
    mat = q.matrix if isinstance(q, GeneratorMatrix) else np.asarray(q, dtype=float)
    if not np.isfinite(t) or t < 0:
        raise InputError(f"t must be finite and >= 0, got {t!r}")
    a = mat * float(t)
    norm = np.abs(a).sum(axis=0).max() if a.size else 0.0
    squarings = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    a = a / 2.0 ** squarings
    result = np.eye(mat.shape[0])
    term = np.eye(mat.shape[0])
    for k in range(1, 100):
        term = term @ a / k
        result = result + term
        if np.abs(term).max() < EXPM_TOLERANCE:
            break
    for _ in range(squarings):
        result = result @ result
    return np.clip(result, 0.0, 1.0)


def fdd_law(n, times):
    """Exact joint law of the partitions at ``times`` started from singletons.

    Returns ``(paths, probs)``: every tuple of canonical partition indices and
    its probability.
    """
    gen = build_generator(n)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or (np.diff(times) <= 0).any() or times[0] < 0:
        raise InputError("times must be nonnegative and strictly increasing")
    steps = [transition_matrix(gen, dt) for dt in np.diff(np.concatenate([[0.0], times]))]
    m = len(gen.partitions)
    paths = list(itertools.product(range(m), repeat=times.size))
    probs = np.empty(len(paths))
    for idx, path in enumerate(paths):
        p, prev = 1.0, 0
        for step, state in zip(steps, path):
            p *= step[prev, state]
            prev = state
        probs[idx] = p
    return paths, probs


def write_matrix_csv(path, matrix, partitions):
    """Write a partition-indexed matrix with a label column and header row."""
    labels = [p.label() for p in partitions]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["partition"] + labels)
        for lab, row in zip(labels, np.asarray(matrix)):
            writer.writerow([lab] + [repr(float(x)) for x in row])
