"""Set partitions of ``[n] = {1, ..., n}``.

Partitions are stored as tuples of sorted blocks ordered by least element.
:func:`enumerate_partitions` fixes the canonical index space used by the
Kingman generator and by every exported matrix.
"""

from functools import lru_cache

import numpy as np

from .errors import InputError, SizeGuardError

MAX_PARTITION_SIZE = 6


class Partition:
    """A partition of ``{1, ..., n}`` into nonempty blocks.

    >>> p = Partition([[3, 1], [2]])
    >>> p.label()
    '{1,3}{2}'
    >>> len(p), p.n
    (2, 3)
    """

    __slots__ = ("blocks", "_n")

    def __init__(self, blocks):
        blocks = tuple(tuple(sorted(int(x) for x in b)) for b in blocks)
        if any(len(b) == 0 for b in blocks):
            raise InputError("partition blocks must be nonempty")
        elements = sorted(x for b in blocks for x in b)
        if elements != list(range(1, len(elements) + 1)):
            raise InputError(f"blocks must be disjoint and cover 1..n, got {blocks}")
        self.blocks = tuple(sorted(blocks))
        self._n = len(elements)

    @classmethod
    def from_labels(cls, labels):
        """Group elements ``1..n`` by ``labels[i - 1]``."""
        groups = {}
        for i, lab in enumerate(labels, start=1):
            groups.setdefault(lab, []).append(i)
        return cls(groups.values())

    @classmethod
    def from_rgs(cls, rgs):
        return cls.from_labels(rgs)

    @classmethod
    def singletons(cls, n):
        return cls([i] for i in range(1, n + 1))

    @classmethod
    def trivial(cls, n):
        return cls([range(1, n + 1)])

    @classmethod
    def parse(cls, text):
        """Inverse of :meth:`label`."""
        text = text.strip()
        if not (text.startswith("{") and text.endswith("}")):
            raise InputError(f"cannot parse partition label {text!r}")
        return cls([int(x) for x in chunk.split(",")] for chunk in text[1:-1].split("}{"))

    @property
    def n(self):
        return self._n

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __eq__(self, other):
        return isinstance(other, Partition) and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __repr__(self):
        return f"Partition({self.label()})"

    def label(self):
        return "".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)

    def rgs(self):
        """Restricted growth string: zero-based block index of each element."""
        out = [0] * self._n
        for k, block in enumerate(self.blocks):
            for x in block:
                out[x - 1] = k
        return tuple(out)

    def merge_sizes(self, finer):
        """Number of blocks of ``finer`` merged into each block of ``self``.

        Returns ``None`` when ``self`` is not a coarsening of ``finer``.
        """
        if finer.n != self._n:
            return None
        where = self.rgs()
        sizes = [0] * len(self.blocks)
        for block in finer.blocks:
            k = where[block[0] - 1]
            if any(where[x - 1] != k for x in block):
                return None
            sizes[k] += 1
        return tuple(sizes)

    def is_coarsening_of(self, finer):
        """True if every block of ``finer`` lies inside a block of ``self`` (equality included)."""
        return self.merge_sizes(finer) is not None


def _rgs_descending(n):
    # restricted growth strings in decreasing lexicographic order
    out = []

    def rec(prefix, top):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for v in range(top + 1, -1, -1):
            rec(prefix + [v], max(top, v))

    rec([0], 0)
    return out


@lru_cache(maxsize=None)
def _partitions(n):
    return tuple(Partition.from_rgs(r) for r in _rgs_descending(n))


def enumerate_partitions(n):
    """All partitions of ``[n]`` in canonical order.

    The order is decreasing lexicographic order of restricted growth strings:
    the all-singletons partition comes first and the single block last.
    Limited to ``1 <= n <= 6``.
    """
    if int(n) != n or not 1 <= n <= MAX_PARTITION_SIZE:
        raise SizeGuardError(f"enumerate_partitions needs 1 <= n <= {MAX_PARTITION_SIZE}, got {n!r}")
    return list(_partitions(int(n)))


@lru_cache(maxsize=None)
def partition_index(n):
    """Map from partition to its position in :func:`enumerate_partitions`."""
    return {p: i for i, p in enumerate(_partitions(n))}


@lru_cache(maxsize=None)
def rgs_index(n):
    """Map from restricted growth string to canonical position."""
    return {p.rgs(): i for i, p in enumerate(_partitions(n))}


def canonical_codes(labels):
    """Canonical partition index of each row of an ``(r, n)`` label array.

    Row ``k`` groups elements ``1..n`` by equal labels; the result indexes
    :func:`enumerate_partitions`.
    """
    labels = np.asarray(labels)
    r, n = labels.shape
    rgs = np.zeros((r, n), dtype=np.int64)
    for k in range(1, n):
        assigned = np.full(r, -1, dtype=np.int64)
        for j in range(k - 1, -1, -1):
            assigned = np.where(labels[:, k] == labels[:, j], rgs[:, j], assigned)
        fresh = rgs[:, :k].max(axis=1) + 1
        rgs[:, k] = np.where(assigned >= 0, assigned, fresh)
    table = _rgs_table(n)
    return table[rgs @ (n ** np.arange(n))]


@lru_cache(maxsize=None)
def _rgs_table(n):
    table = np.full(n ** n, -1, dtype=np.int64)
    powers = n ** np.arange(n)
    for rgs, idx in rgs_index(n).items():
        table[int(np.dot(rgs, powers))] = idx
    return table
