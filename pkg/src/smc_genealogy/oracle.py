"""Brute-force reference computations for tiny systems.

Nothing here shares code with the analytic routines it is used to check:
transition probabilities are obtained by listing every ancestor vector
consistent with a set of offspring counts and counting, and falling
binomial moments by plain Monte Carlo.

Leaf convention: the ``m = |xi|`` lineages of a partition ``xi`` occupy the
child slots ``0..m-1`` of the generation below the parents. Under the
standing assumption (ancestors uniform given the counts) any other choice of
``m`` distinct slots gives the same answer.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, SizeGuardError

MAX_ORACLE_N = 6


@dataclass(frozen=True)
class EnumerationReport:
    """An analytic value next to its brute-force counterpart."""

    case: str
    analytic: float
    brute_force: float
    abs_diff: float
    std_error: float = float("nan")

    @property
    def z_score(self):
        return self.abs_diff / self.std_error if self.std_error > 0 else float("nan")


def _counts(nu):
    nu = [int(x) for x in nu]
    if any(x < 0 for x in nu):
        raise InputError("offspring counts must be nonnegative")
    return nu


def enumerate_consistent_ancestors(nu, num_particles=None):
    """Every ancestor vector (zero-based tuple) whose offspring counts equal ``nu``."""
    nu = _counts(nu)
    n = len(nu) if num_particles is None else int(num_particles)
    if n > MAX_ORACLE_N:
        raise SizeGuardError(f"oracle enumeration is limited to N <= {MAX_ORACLE_N}")
    if len(nu) != n or sum(nu) != n:
        raise InputError(f"counts must have length N and sum to N = {n}")
    out = []
    remaining = list(nu)
    vector = [0] * n

    def fill(pos):
        if pos == n:
            out.append(tuple(vector))
            return
        for parent in range(n):
            if remaining[parent]:
                remaining[parent] -= 1
                vector[pos] = parent
                fill(pos + 1)
                remaining[parent] += 1

    fill(0)
    return out


def multinomial_coefficient(nu):
    out = math.factorial(sum(nu))
    for x in nu:
        out //= math.factorial(x)
    return out


def _blocks(partition):
    return [frozenset(b) for b in partition.blocks]


def brute_force_transition(nu, xi, eta):
    """Fraction of consistent ancestor vectors that coarsen ``xi`` exactly into ``eta``.

    Block ``k`` of ``xi`` is a lineage sitting in child slot ``k``; two
    lineages merge when their slots share a parent.
    """
    nu = _counts(nu)
    if len(xi.blocks) > 4:
        raise SizeGuardError("brute_force_transition is limited to |xi| <= 4")
    if len(xi.blocks) > len(nu):
        raise InputError("|xi| exceeds N")
    if xi.n != eta.n:
        raise InputError("xi and eta must partition the same set")
    xi_blocks = _blocks(xi)
    target = set(_blocks(eta))
    vectors = enumerate_consistent_ancestors(nu)
    hits = 0
    for a in vectors:
        groups = {}
        for slot, block in enumerate(xi_blocks):
            groups.setdefault(a[slot], set()).update(block)
        if set(frozenset(g) for g in groups.values()) == target:
            hits += 1
    return hits / len(vectors)


def falling_moment_exact(num_trials, p, q):
    """``(N)_q p^q``, computed as a plain product."""
    out = 1.0
    for k in range(q):
        out *= num_trials - k
    return out * p ** q


def verify_binomial_falling_moments(num_trials, p, q, draws, rng):
    """Monte Carlo check of ``E[(X)_q] = (N)_q p^q`` for ``X ~ Bin(N, p)``."""
    if not 1 <= q <= 4:
        raise InputError("q must lie in 1..4")
    if not 0 <= p <= 1:
        raise InputError("p must be a probability")
    x = rng.binomial(num_trials, p, size=int(draws)).astype(float)
    fall = np.ones_like(x)
    for k in range(q):
        fall *= x - k
    estimate = fall.mean()
    se = fall.std(ddof=1) / math.sqrt(fall.size) if fall.size > 1 else float("nan")
    exact = falling_moment_exact(num_trials, p, q)
    return EnumerationReport(
        case=f"Bin(N={num_trials}, p={p}) q={q}",
        analytic=exact,
        brute_force=float(estimate),
        abs_diff=abs(exact - float(estimate)),
        std_error=float(se),
    )


def write_reports_csv(reports, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["case", "analytic", "brute_force", "abs_diff"])
        for r in reports:
            writer.writerow([r.case, repr(r.analytic), repr(r.brute_force), repr(r.abs_diff)])
