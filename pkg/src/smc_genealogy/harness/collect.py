"""Per-replicate genealogy collection shared by all experiments.

Two samplers produce the same :class:`ReplicateRecord`:

* the engine path runs the particle filter forward with
  :func:`~smc_genealogy.engine.run_smc_batch`, a fixed block of replicates
  at a time, then traces leaf sets backwards;
* the neutral path covers ``g == 1`` with multinomial resampling. There the
  ancestor vectors of different generations are iid uniform and independent
  of the states, so reverse generations can be drawn lazily, batched over
  replicates, and stopped as soon as every queried statistic is resolved.
  The law of everything recorded is the same as on the engine path.

Both paths assert the per-path invariants while collecting: ``D <= c <= 1``
every generation, ``t <= C(tau(t)) < t + 1`` for every queried time, and
monotone coarsening of every traced genealogy.
"""

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..engine import ancestor_dtype, run_smc_batch
from ..errors import InvariantViolation
from ..genealogy import (CoalescenceSeries, _time_changes, batch_transition_matrices,
                         trace_genealogy)
from ..model import OuModelConfig, bootstrap_model, neutral_model, simulate_ou_trajectory
from ..partitions import canonical_codes
from ..seeding import make_rng

# slack for comparing D and c, which are rounded independently
STAT_SLACK = 1e-12
# ancestor storage per batch and a cap on rows per batch
BATCH_BYTES = 256 * 2 ** 20
MAX_BATCH_ROWS = 50


@dataclass(frozen=True)
class CollectRequest:
    """What to record for every replicate."""

    leaf_sizes: tuple = ()
    fdd_n: Optional[int] = None
    times: tuple = ()
    write_traces: bool = False


@dataclass
class ReplicateRecord:
    replicate: int
    scheme: str
    num_particles: int
    excluded: Optional[str] = None
    # n -> (height in generations, height in coalescent units); None when censored
    heights: dict = field(default_factory=dict)
    # canonical partition index at each queried time, None when censored
    fdd_path: Optional[tuple] = None
    # law of the fdd path given the offspring counts, over itertools.product order
    fdd_conditional: Optional[np.ndarray] = None
    # n -> list of (generation, num_blocks) at generation 0 and every change
    traces: dict = field(default_factory=dict)
    checks: int = 0


def uses_neutral_sampler(config, scheme, enabled=True):
    return enabled and config.model == "neutral" and scheme == "multinomial"


def shared_observations(config):
    """The single observed trajectory used by every run in ``shared`` mode, else ``None``.

    It is long enough for the largest horizon; smaller horizons use a prefix.
    """
    if config.model != "ou" or config.observations != "shared":
        return None
    horizon = max(config.horizon_for(n) for n in config.particles)
    ou = OuModelConfig(config.step_size, config.obs_noise)
    _, obs = simulate_ou_trajectory(ou, horizon, make_rng(config.seed, "observations"))
    return obs


def replicate_observations(config, n_particles, replicate):
    """Observed trajectory of one replicate in ``per_replicate`` mode."""
    ou = OuModelConfig(config.step_size, config.obs_noise)
    horizon = config.horizon_for(n_particles)
    _, obs = simulate_ou_trajectory(ou, horizon, make_rng(config.seed, "observations", n_particles, replicate))
    return obs


def build_model(config, observations, n_particles, replicates=()):
    """Model for one batch; ``replicates`` selects per-replicate observation rows."""
    horizon = config.horizon_for(n_particles)
    if config.model == "neutral":
        return neutral_model(horizon)
    if config.observations == "shared":
        obs = observations[: horizon + 1]
    else:
        obs = np.stack([replicate_observations(config, n_particles, r) for r in replicates])
    return bootstrap_model(OuModelConfig(config.step_size, config.obs_noise, obs))


def _fail(msg, record):
    raise InvariantViolation(
        f"{msg} (scheme={record.scheme}, N={record.num_particles}, replicate={record.replicate})")


def _check_series(series, record):
    c, d = series.c[1:], series.d[1:]
    if (d > c + STAT_SLACK).any():
        _fail("D_N exceeds c_N", record)
    if (c > 1.0).any() or (c < 0).any():
        _fail("c_N outside [0, 1]", record)
    if (np.diff(series.cumulative) < 0).any():
        _fail("cumulative coalescence decreased", record)
    record.checks += 2 * c.size


def _check_sandwich(cum, taus, times, record):
    for t, s in zip(times, taus):
        if t <= 0:
            continue
        if not (cum[s] >= t and cum[s] < t + 1 and (s == 1 or cum[s - 1] < t)):
            _fail(f"time change sandwich fails at t={t}", record)
        record.checks += 1


def _change_points(num_blocks):
    keep = np.flatnonzero(np.concatenate([[True], np.diff(num_blocks) != 0]))
    return [(int(g), int(num_blocks[g])) for g in keep]


def _joint_from_segments(segments):
    """Law of the partition path given per-segment transition matrices."""
    m = segments[0].shape[0]
    probs = []
    for path in itertools.product(range(m), repeat=len(segments)):
        p, prev = 1.0, 0
        for seg, state in zip(segments, path):
            p *= seg[prev, state]
            prev = state
        probs.append(p)
    return np.array(probs)


def _counts_for_reverse_generations(ancestors, last):
    horizon, n = ancestors.shape
    rows = ancestors[horizon - last:][::-1]  # reverse generations 1..last
    offsets = (np.arange(last) * n)[:, None]
    return np.bincount((rows + offsets).ravel(), minlength=last * n).reshape(last, n)


def batch_rows(config, n_particles):
    """Replicates simulated together; depends only on the config, never on threads."""
    per_row = config.horizon_for(n_particles) * n_particles * np.dtype(ancestor_dtype(n_particles)).itemsize
    return int(min(MAX_BATCH_ROWS, config.replicates, max(1, BATCH_BYTES // per_row)))


def _engine_batch(task):
    config, observations, n_particles, first, count, request, fast = task
    model = build_model(config, observations, n_particles, range(first, first + count))
    batch_index = first // batch_rows(config, n_particles)
    records = []
    for scheme in config.schemes:
        if uses_neutral_sampler(config, scheme, fast):
            continue
        batch = run_smc_batch(model, n_particles, count, scheme,
                              seed=make_rng(config.seed, "smc", n_particles, batch_index),
                              permute=config.permute)
        for row in range(count):
            rec = ReplicateRecord(first + row, scheme, n_particles)
            records.append(rec)
            if batch.degenerate[row] >= 0:
                rec.excluded = f"all weights vanished at generation {int(batch.degenerate[row])}"
                continue
            _engine_replicate(batch.replicate(row), config, request, rec)
    return records


def _engine_replicate(history, config, request, rec):
    n_particles = history.num_particles
    series = CoalescenceSeries.from_history(history)
    _check_series(series, rec)
    # nested leaf sets: every prefix of a uniform permutation is a uniform subset
    order = make_rng(config.seed, "leaves", n_particles, rec.replicate).permutation(n_particles)
    for n in request.leaf_sizes:
        leaves = np.sort(order[:n])
        trace = trace_genealogy(history, leaves)
        blocks = trace.num_blocks()
        if (np.diff(blocks) > 0).any():
            _fail("genealogy trace is not monotonically coarsening", rec)
        rec.checks += 1
        if trace.mrca is None:
            rec.heights[n] = None
        else:
            rec.heights[n] = (trace.mrca, float(series.cumulative[trace.mrca]))
        if request.write_traces:
            rec.traces[n] = _change_points(blocks)
    if request.fdd_n:
        _engine_fdd(history, series, order[:request.fdd_n], request, rec)


def _engine_fdd(history, series, leaves, request, rec):
    taus = _time_changes(series.cumulative, request.times)
    if (taus < 0).any():
        return
    _check_sandwich(series.cumulative, taus, request.times, rec)
    trace = trace_genealogy(history, leaves)
    labels = np.array([trace.lineages[min(s, trace.generations)] for s in taus])
    rec.fdd_path = tuple(int(x) for x in canonical_codes(labels))
    last = int(taus.max())
    mats = batch_transition_matrices(_counts_for_reverse_generations(history.ancestors, last), request.fdd_n) \
        if last > 0 else None
    segments, prev = [], 0
    size = 1 if request.fdd_n == 1 else (2 if request.fdd_n == 2 else 5)
    for s in taus:
        seg = np.eye(size)
        for g in range(prev + 1, s + 1):
            seg = seg @ mats[g - 1]
        segments.append(seg)
        prev = s
    rec.fdd_conditional = _joint_from_segments(segments)


def _neutral_batch(config, n_particles, request):
    """Reverse-time sampler for the neutral model with multinomial resampling."""
    reps = config.replicates
    horizon = config.horizon_for(n_particles)
    rng = make_rng(config.seed, "neutral", n_particles)
    sizes = list(request.leaf_sizes)
    fdd_n = request.fdd_n or 0
    times = np.asarray(request.times, dtype=float) if fdd_n else np.zeros(0)
    width = max(sizes + [fdd_n, 1])
    lineages = np.tile(np.arange(width, dtype=np.int64), (reps, 1))
    merged = np.zeros((reps, width), dtype=bool)
    merged[:, 0] = True
    pair_cum = np.zeros(reps, dtype=np.int64)
    denom = n_particles * (n_particles - 1)
    h_gen = np.full((reps, len(sizes)), -1, dtype=np.int64)
    h_res = np.full((reps, len(sizes)), np.nan)
    for j, n in enumerate(sizes):
        if n == 1:
            h_gen[:, j] = 0
            h_res[:, j] = 0.0
    m = {0: 1, 1: 1, 2: 2, 3: 5}[fdd_n]
    next_t = np.zeros(reps, dtype=np.int64)
    paths = np.full((reps, times.size), -1, dtype=np.int64)
    segments = np.zeros((reps, times.size, m, m))
    current = np.tile(np.eye(m), (reps, 1, 1))
    checks = np.zeros(reps, dtype=np.int64)
    # times equal to zero sit at generation 0
    for k, t in enumerate(times):
        if t <= 0:
            paths[:, k] = 0
            segments[:, k] = np.eye(m)
            next_t[:] = k + 1
    offsets = (np.arange(reps) * n_particles)[:, None]
    cum_prev = np.zeros(reps)

    def active_rows():
        pending = (h_gen < 0).any(axis=1)
        if fdd_n:
            pending |= next_t < times.size
        return np.flatnonzero(pending)

    idx = active_rows()
    for s in range(1, horizon + 1):
        if idx.size == 0:
            break
        r = idx.size
        a = rng.integers(0, n_particles, size=(r, n_particles))
        counts = np.bincount((a + offsets[:r]).ravel(), minlength=r * n_particles).reshape(r, n_particles)
        fall2 = counts * (counts - 1)
        pair = fall2.sum(axis=1)
        sq = counts * counts
        d_num = np.einsum("ij,ij->i", fall2, n_particles * counts + (sq.sum(axis=1, keepdims=True) - sq))
        # D <= c  <=>  d_num / (N^2 (N)_2) <= pair / (N)_2
        if (d_num > pair * n_particles * n_particles).any() or (pair > denom).any():
            bad = idx[np.argmax((d_num > pair * n_particles * n_particles) | (pair > denom))]
            _fail(f"D_N <= c_N <= 1 fails at generation {s}",
                  ReplicateRecord(int(bad), "multinomial", n_particles))
        checks[idx] += 2
        lin = np.take_along_axis(a, lineages[idx], axis=1)
        lineages[idx] = lin
        eq = lin == lin[:, :1]
        if (merged[idx] & ~eq).any():
            _fail("genealogy trace is not monotonically coarsening",
                  ReplicateRecord(int(idx[0]), "multinomial", n_particles))
        merged[idx] = eq
        checks[idx] += 1
        pair_cum[idx] += pair
        cum = pair_cum[idx] / denom
        prefix = np.logical_and.accumulate(eq, axis=1)
        for j, n in enumerate(sizes):
            new = prefix[:, n - 1] & (h_gen[idx, j] < 0)
            h_gen[idx[new], j] = s
            h_res[idx[new], j] = cum[new]
        if fdd_n:
            current[idx] = current[idx] @ batch_transition_matrices(counts, fdd_n)
            codes = None
            while True:
                nt = next_t[idx]
                hit = nt < times.size
                hit[hit] = cum[hit] >= times[nt[hit]]
                if not hit.any():
                    break
                rows = idx[hit]
                t_hit = times[nt[hit]]
                if not ((cum[hit] < t_hit + 1) & (cum_prev[rows] < t_hit)).all():
                    _fail("time change sandwich fails", ReplicateRecord(int(rows[0]), "multinomial", n_particles))
                checks[rows] += 1
                if codes is None:
                    codes = canonical_codes(lin[:, :fdd_n])
                paths[rows, nt[hit]] = codes[hit]
                segments[rows, nt[hit]] = current[rows]
                current[rows] = np.eye(m)
                next_t[rows] += 1
        cum_prev[idx] = cum
        idx = active_rows()

    records = []
    for rep in range(reps):
        rec = ReplicateRecord(rep, "multinomial", n_particles, checks=int(checks[rep]))
        for j, n in enumerate(sizes):
            rec.heights[n] = None if h_gen[rep, j] < 0 else (int(h_gen[rep, j]), float(h_res[rep, j]))
        if fdd_n and next_t[rep] == times.size:
            rec.fdd_path = tuple(int(x) for x in paths[rep])
            rec.fdd_conditional = _joint_from_segments(list(segments[rep]))
        records.append(rec)
    return records


def collect(config, request_for, observations=None, neutral_fast_path=True):
    """Run every replicate for every N and scheme.

    ``request_for(N)`` returns the :class:`CollectRequest` for particle count
    ``N``. Returns ``{(scheme, N): [ReplicateRecord, ...]}`` ordered by
    replicate index, independent of the number of worker processes.
    ``neutral_fast_path=False`` sends neutral multinomial runs through the
    particle engine as well.
    """
    if observations is None:
        observations = shared_observations(config)
    out = {}
    for n_particles in config.particles:
        request = request_for(n_particles)
        fast = neutral_fast_path
        if any(uses_neutral_sampler(config, s, fast) for s in config.schemes):
            out[("multinomial", n_particles)] = _neutral_batch(config, n_particles, request)
        if all(uses_neutral_sampler(config, s, fast) for s in config.schemes):
            continue
        rows = batch_rows(config, n_particles)
        tasks = [(config, observations, n_particles, first, min(rows, config.replicates - first), request, fast)
                 for first in range(0, config.replicates, rows)]
        if config.threads > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=config.threads) as pool:
                results = list(pool.map(_engine_batch, tasks))
        else:
            results = [_engine_batch(task) for task in tasks]
        for records in results:
            for rec in records:
                out.setdefault((rec.scheme, n_particles), []).append(rec)
        for scheme in config.schemes:
            if not uses_neutral_sampler(config, scheme, fast):
                out[(scheme, n_particles)].sort(key=lambda r: r.replicate)
    return {key: out[key] for key in sorted(out, key=lambda k: (k[1], config.schemes.index(k[0])))}
