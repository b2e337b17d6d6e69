"""Simulation of a weighted interacting particle system.

:func:`run_smc` alternates resampling, propagation and reweighting for
``T`` steps and records the whole history. Resampling happens at every step.
Weights are computed from log-potentials shifted by their maximum before
exponentiation, so potentials that underflow individually still give valid
weights as long as one particle has positive potential.
"""

import csv
import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateWeightsError, InputError, NumericError
from .model import ModelSpec
from .resampling import check_weights, permutes, resampler, row_resampler
from .seeding import RNG_ALGORITHM, make_rng

STORE_MODES = ("full", "ancestors")
BINARY_MAGIC = b"SMCGEN01"


@dataclass
class ParticleHistory:
    """Record of one run.

    ``ancestors[t, i]`` is the zero-based parent, in generation ``t``, of
    particle ``i`` in generation ``t + 1``. ``states`` and ``weights`` have one
    row per generation ``0..T`` and are ``None`` for runs with
    ``store="ancestors"``, which keep only ancestors, the ESS series and the
    final weights.
    """

    ancestors: np.ndarray
    ess: np.ndarray
    final_weights: np.ndarray
    states: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def num_particles(self):
        return self.ancestors.shape[1]

    @property
    def horizon(self):
        return self.ancestors.shape[0]

    def validate(self):
        n, t = self.num_particles, self.horizon
        if self.ancestors.min(initial=0) < 0 or self.ancestors.max(initial=0) >= n:
            raise InputError("ancestor index out of range")
        if self.ess.shape != (t + 1,):
            raise InputError("ESS series length must be T + 1")
        if self.weights is not None:
            if self.weights.shape != (t + 1, n):
                raise InputError("weights must have shape (T + 1, N)")
            if np.max(np.abs(self.weights.sum(axis=1) - 1.0)) > 1e-9:
                raise InputError("weights of some generation do not sum to 1")
        if self.states is not None and self.states.shape[:2] != (t + 1, n):
            raise InputError("states must have shape (T + 1, N)")
        for key, value in (("N", n), ("T", t)):
            if key in self.meta and self.meta[key] != value:
                raise InputError(f"meta[{key!r}] = {self.meta[key]} but the arrays say {value}")
        return self


def ess(w):
    """Effective sample size ``1 / sum(w**2)`` of a normalized weight vector."""
    w = check_weights(w)
    return 1.0 / np.dot(w, w)


def normalize_log_weights(log_w, generation):
    """Normalized weights from log-potentials, with max-shift."""
    log_w = np.asarray(log_w, dtype=float)
    if np.isnan(log_w).any() or np.isposinf(log_w).any():
        raise NumericError(f"nonfinite potential at generation {generation}")
    top = log_w.max()
    if top == -np.inf:
        raise DegenerateWeightsError(generation)
    w = np.exp(log_w - top)
    w /= w.sum()
    return w


def run_smc(model, num_particles, scheme="multinomial", seed=0, permute="auto", store="full"):
    """Simulate the particle system defined by ``model``.

    Parameters
    ----------
    model : ModelSpec
    num_particles : int
        ``N >= 2``.
    scheme : str
        One of ``multinomial``, ``residual``, ``stratified``, ``systematic``.
    seed : int, SeedSequence or Generator
    permute : {"auto", "on", "off"} or bool
        Random permutation of each ancestor vector; ``auto`` permutes every
        scheme but multinomial.
    store : {"full", "ancestors"}
        ``ancestors`` drops states and per-generation weights.

    Returns
    -------
    ParticleHistory
    """
    if not isinstance(model, ModelSpec):
        raise InputError("model must be a ModelSpec")
    n = int(num_particles)
    if n != num_particles or n < 2:
        raise InputError(f"need an integer number of particles >= 2, got {num_particles!r}")
    if store not in STORE_MODES:
        raise InputError(f"store must be one of {STORE_MODES}")
    resample = resampler(scheme, permute)
    rng = make_rng(seed)
    horizon = model.horizon
    full = store == "full"

    ancestors = np.empty((horizon, n), dtype=np.int32)
    ess_series = np.empty(horizon + 1)
    states = weights = None

    x = np.asarray(model.initial_sampler(rng, n), dtype=float)
    w = normalize_log_weights(model.log_potential(None, x, 0), 0)
    if full:
        states = np.empty((horizon + 1,) + x.shape)
        weights = np.empty((horizon + 1, n))
        states[0] = x
        weights[0] = w
    ess_series[0] = 1.0 / np.dot(w, w)

    for t in range(horizon):
        a = resample(w, rng)
        ancestors[t] = a
        parents = x[a]
        x = model.transition_sampler(rng, parents, t + 1)
        w = normalize_log_weights(model.log_potential(parents, x, t + 1), t + 1)
        ess_series[t + 1] = 1.0 / np.dot(w, w)
        if full:
            states[t + 1] = x
            weights[t + 1] = w

    meta = {
        "N": n,
        "T": horizon,
        "scheme": scheme,
        "permuted": permutes(scheme, permute),
        "seed": _seed_repr(seed),
        "model": model.name,
        "rng": RNG_ALGORITHM,
    }
    return ParticleHistory(ancestors, ess_series, w, states, weights, meta)



@dataclass
class BatchHistory:
    """Ancestors of ``R`` independent runs simulated in lockstep.

    ``ancestors[r]`` has the layout of :attr:`ParticleHistory.ancestors`.
    ``degenerate[r]`` is the first generation at which run ``r`` had no
    positive weight, or ``-1``; such runs continue with uniform weights so the
    batch stays aligned, and callers should discard them.
    """

    ancestors: np.ndarray
    ess: np.ndarray
    final_weights: np.ndarray
    degenerate: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def replicates(self):
        return self.ancestors.shape[0]

    def replicate(self, r):
        meta = dict(self.meta, replicate=int(r))
        return ParticleHistory(self.ancestors[r], self.ess[r], self.final_weights[r], meta=meta)


def _normalize_log_weight_rows(log_w, generation, degenerate):
    if np.isnan(log_w).any() or np.isposinf(log_w).any():
        raise NumericError(f"nonfinite potential at generation {generation}")
    top = log_w.max(axis=1, keepdims=True)
    dead = top[:, 0] == -np.inf
    if dead.any():
        degenerate[dead & (degenerate < 0)] = generation
        log_w[dead] = 0.0
        top[dead] = 0.0
    w = np.exp(log_w - top)
    w /= w.sum(axis=1, keepdims=True)
    return w


def ancestor_dtype(num_particles):
    return np.int16 if num_particles <= np.iinfo(np.int16).max + 1 else np.int32


def run_smc_batch(model, num_particles, replicates, scheme="multinomial", seed=0, permute="auto"):
    """Run ``replicates`` independent copies of :func:`run_smc` together.

    The model callables receive ``(R, N)`` arrays, so they must act
    elementwise (the bundled models do). Only ancestors, the ESS series and
    final weights are kept; ancestors use the narrowest integer type that
    holds ``N - 1``. Each row has the same law as a ``run_smc`` run, but the
    random streams differ, so rows do not reproduce single runs bit for bit.

    Returns
    -------
    BatchHistory
    """
    if not isinstance(model, ModelSpec):
        raise InputError("model must be a ModelSpec")
    n, r = int(num_particles), int(replicates)
    if n != num_particles or n < 2:
        raise InputError(f"need an integer number of particles >= 2, got {num_particles!r}")
    if r != replicates or r < 1:
        raise InputError(f"need an integer number of replicates >= 1, got {replicates!r}")
    resample = row_resampler(scheme, permute)
    rng = make_rng(seed)
    horizon = model.horizon
    ancestors = np.empty((r, horizon, n), dtype=ancestor_dtype(n))
    ess_series = np.empty((r, horizon + 1))
    degenerate = np.full(r, -1, dtype=np.int64)
    rows = np.arange(r)[:, None]

    x = np.asarray(model.initial_sampler(rng, (r, n)), dtype=float)
    w = _normalize_log_weight_rows(np.array(model.log_potential(None, x, 0), dtype=float), 0, degenerate)
    ess_series[:, 0] = 1.0 / np.einsum("ij,ij->i", w, w)
    for t in range(horizon):
        a = resample(w, rng)
        ancestors[:, t] = a
        parents = x[rows, a]
        x = model.transition_sampler(rng, parents, t + 1)
        log_w = np.array(model.log_potential(parents, x, t + 1), dtype=float)
        w = _normalize_log_weight_rows(log_w, t + 1, degenerate)
        ess_series[:, t + 1] = 1.0 / np.einsum("ij,ij->i", w, w)

    meta = {
        "N": n,
        "T": horizon,
        "replicates": r,
        "scheme": scheme,
        "permuted": permutes(scheme, permute),
        "seed": _seed_repr(seed),
        "model": model.name,
        "rng": RNG_ALGORITHM,
    }
    return BatchHistory(ancestors, ess_series, w, degenerate, meta)

def _seed_repr(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    if isinstance(seed, np.random.Generator):
        return "generator"
    return int(seed)


def write_ancestors_csv(history, path):
    """Write ``t,i,parent`` rows with one-based particle indices.

    ``t`` is the resampling step (0..T-1): offspring ``i`` of generation
    ``t + 1`` descends from ``parent`` in generation ``t``.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "i", "parent"])
        for t, row in enumerate(history.ancestors):
            for i, p in enumerate(row):
                writer.writerow([t, i + 1, int(p) + 1])


def read_ancestors_csv(path):
    """Inverse of :func:`write_ancestors_csv`; returns a zero-based (T, N) array."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["t", "i", "parent"]:
            raise InputError(f"{path}: expected header t,i,parent")
        rows = np.array([[int(r["t"]), int(r["i"]), int(r["parent"])] for r in reader], dtype=np.int64)
    horizon = rows[:, 0].max() + 1
    n = rows[:, 1].max()
    out = np.full((horizon, n), -1, dtype=np.int32)
    out[rows[:, 0], rows[:, 1] - 1] = rows[:, 2] - 1
    if (out < 0).any():
        raise InputError(f"{path}: missing rows")
    return out


def write_weights_csv(history, path):
    """Per-generation weight summary ``t,ess,max_weight``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "ess", "max_weight"])
        for t, value in enumerate(history.ess):
            if history.weights is not None:
                top = repr(float(history.weights[t].max()))
            elif t == history.horizon:
                top = repr(float(history.final_weights.max()))
            else:
                top = ""
            writer.writerow([t, repr(float(value)), top])


def write_meta_json(history, path):
    with open(path, "w") as fh:
        json.dump(history.meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_history_binary(history, path):
    """Dump ancestors in a fixed little-endian layout.

    Layout: 8 magic bytes ``SMCGEN01``; a little-endian uint32 ``L``; ``L``
    bytes of UTF-8 JSON metadata (including ``N``, ``T`` and
    ``"dtype": "<i4"``); then ``T * N`` little-endian int32 parent indices,
    zero-based, row-major by resampling step.
    """
    meta = dict(history.meta, N=history.num_particles, T=history.horizon, dtype="<i4")
    header = json.dumps(meta, sort_keys=True).encode("utf8")
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(history.ancestors, dtype="<i4").tobytes())


def read_history_binary(path):
    """Read a dump written by :func:`write_history_binary` (ancestors and meta only)."""
    with open(path, "rb") as fh:
        if fh.read(8) != BINARY_MAGIC:
            raise InputError(f"{path}: not an ancestor dump")
        (length,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(length).decode("utf8"))
        data = np.frombuffer(fh.read(), dtype="<i4")
    ancestors = data.reshape(meta["T"], meta["N"]).astype(np.int32)
    meta.pop("dtype", None)
    nan = np.full(meta["T"] + 1, np.nan)
    return ParticleHistory(ancestors, nan, np.full(meta["N"], np.nan), meta=meta)
