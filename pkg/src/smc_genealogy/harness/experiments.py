"""Batch experiments: tree heights, finite-dimensional laws and N-scaling.

Every experiment collects replicates with :func:`.collect.collect`, reduces
them in replicate order and writes plain CSV files. Floats are written with
``repr`` so identical inputs give byte-identical files.
"""

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .. import kingman
from ..errors import ConfigurationError, InputError
from ..model import write_observations_csv
from ..partitions import enumerate_partitions
from .collect import CollectRequest, collect, shared_observations

HEIGHTS_HEADER = ["replicate", "scheme", "N", "n", "height_generations", "height_rescaled", "censored"]
SUMMARY_HEADER = ["scheme", "N", "n", "mean_height", "var_height", "mean_rescaled", "var_rescaled",
                  "censor_rate", "replicates"]
TRACES_HEADER = ["replicate", "n", "generation", "num_blocks"]
EXCLUSIONS_HEADER = ["replicate", "scheme", "N", "reason"]


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def _moments(values):
    """Sample mean and unbiased variance; ``nan`` for no values and 0 for a single one."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return math.nan, math.nan
    var = float(values.var(ddof=1)) if values.size > 1 else 0.0
    return float(values.mean()), var


@dataclass(frozen=True)
class SummaryRow:
    scheme: str
    N: int
    n: int
    mean_height: float
    var_height: float
    mean_rescaled: float
    var_rescaled: float
    censor_rate: float
    replicates: int

    def as_row(self):
        return [self.scheme, self.N, self.n, self.mean_height, self.var_height,
                self.mean_rescaled, self.var_rescaled, self.censor_rate, self.replicates]


@dataclass
class HeightSummary:
    """Tree-height moments per (scheme, N, n).

    ``replicates`` counts the replicates kept after exclusions; censored
    genealogies are part of that count but not of the moments.
    """

    rows: list
    excluded: dict = field(default_factory=dict)
    invariant_checks: int = 0
    files: dict = field(default_factory=dict)

    def row(self, scheme, N, n):
        for r in self.rows:
            if (r.scheme, r.N, r.n) == (scheme, N, n):
                return r
        raise KeyError((scheme, N, n))

    def schemes(self):
        return list(dict.fromkeys(r.scheme for r in self.rows))

    def particle_counts(self):
        return sorted({r.N for r in self.rows})

    def select(self, scheme=None, N=None):
        return [r for r in self.rows if (scheme is None or r.scheme == scheme) and (N is None or r.N == N)]


def summarize(records_by_key, leaf_sizes_for):
    rows, excluded, checks = [], {}, 0
    for (scheme, n_particles), records in records_by_key.items():
        kept = [r for r in records if r.excluded is None]
        excluded[(scheme, n_particles)] = len(records) - len(kept)
        checks += sum(r.checks for r in records)
        for n in leaf_sizes_for(n_particles):
            done = [r.heights[n] for r in kept if r.heights.get(n) is not None]
            mean_h, var_h = _moments([h[0] for h in done])
            mean_r, var_r = _moments([h[1] for h in done])
            censor = (len(kept) - len(done)) / len(kept) if kept else math.nan
            rows.append(SummaryRow(scheme, n_particles, n, mean_h, var_h, mean_r, var_r, censor, len(kept)))
    return HeightSummary(rows, excluded, checks)


def _height_rows(records_by_key):
    for (scheme, n_particles), records in records_by_key.items():
        for rec in records:
            if rec.excluded is not None:
                continue
            for n, h in rec.heights.items():
                if h is None:
                    yield [rec.replicate, scheme, n_particles, n, "", "", 1]
                else:
                    yield [rec.replicate, scheme, n_particles, n, h[0], h[1], 0]


def _trace_rows(records_by_key):
    for (scheme, n_particles), records in records_by_key.items():
        for rec in records:
            for n, points in rec.traces.items():
                for generation, blocks in points:
                    yield [rec.replicate, n, generation, blocks]


def _exclusion_rows(records_by_key):
    for (scheme, n_particles), records in records_by_key.items():
        for rec in records:
            if rec.excluded is not None:
                yield [rec.replicate, scheme, n_particles, rec.excluded]


def write_summary_csv(summary, path):
    _write_csv(path, SUMMARY_HEADER, (r.as_row() for r in summary.rows))


def read_summary_csv(path):
    """Load a ``summary.csv`` back into a :class:`HeightSummary`."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != SUMMARY_HEADER:
                raise InputError(f"{path}: expected header {','.join(SUMMARY_HEADER)}")
            rows = [SummaryRow(s, int(N), int(n), float(a), float(b), float(c), float(d), float(e), int(r))
                    for s, N, n, a, b, c, d, e, r in reader]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: malformed row ({exc})") from exc
    return HeightSummary(rows)


def _prepare(config):
    config.validate()
    config.check_horizons()
    for n_particles in config.particles:
        sizes = config.leaf_sizes_for(n_particles)
        if max(sizes, default=0) > n_particles:
            raise ConfigurationError(f"leaf size {max(sizes)} exceeds N = {n_particles}")
    os.makedirs(config.out_dir, exist_ok=True)
    observations = shared_observations(config)
    if observations is not None:
        write_observations_csv(os.path.join(config.out_dir, "observations.csv"), observations)
    return observations


def run_height_experiment(config, plots=True):
    """Tree heights for every scheme, N and leaf-set size in ``config``.

    Writes ``heights.csv``, ``summary.csv``, ``exclusions.csv``, optionally
    ``traces.csv``, and the mean/variance SVG plots.

    Returns
    -------
    HeightSummary
    """
    observations = _prepare(config)
    request = lambda N: CollectRequest(tuple(config.leaf_sizes_for(N)), write_traces=config.write_traces)
    records = collect(config, request, observations)
    summary = summarize(records, config.leaf_sizes_for)
    out = config.out_dir
    files = {"heights": os.path.join(out, "heights.csv"), "summary": os.path.join(out, "summary.csv"),
             "exclusions": os.path.join(out, "exclusions.csv")}
    _write_csv(files["heights"], HEIGHTS_HEADER, _height_rows(records))
    write_summary_csv(summary, files["summary"])
    _write_csv(files["exclusions"], EXCLUSIONS_HEADER, _exclusion_rows(records))
    if config.write_traces:
        files["traces"] = os.path.join(out, "traces.csv")
        _write_csv(files["traces"], TRACES_HEADER, _trace_rows(records))
    if plots:
        from .plots import emit_plots
        files["plots"] = emit_plots(summary, out)
    summary.files = files
    return summary


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


@dataclass(frozen=True)
class FddRow:
    scheme: str
    N: int
    replicates: int
    censored: int
    tv_sampled: float
    tv_conditional: float
    sampled: np.ndarray
    conditional: np.ndarray


@dataclass
class FddReport:
    """Distance between the rescaled genealogy and the coalescent at fixed times.

    ``tv_sampled`` compares the empirical law of the observed partition path
    with the exact law. ``tv_conditional`` averages, over replicates, the law
    of the path given that replicate's offspring counts; it has the same
    expectation as the empirical law and far less variance.
    """

    n: int
    times: tuple
    paths: list
    exact: np.ndarray
    rows: list
    invariant_checks: int = 0
    files: dict = field(default_factory=dict)

    def select(self, scheme):
        return sorted((r for r in self.rows if r.scheme == scheme), key=lambda r: r.N)

    def trend(self, scheme, estimator="conditional"):
        """Kendall's tau of TV against N and whether TV strictly decreases."""
        rows = self.select(scheme)
        tv = [getattr(r, f"tv_{estimator}") for r in rows]
        if len(rows) < 2 or any(math.isnan(x) for x in tv):
            return math.nan, False
        tau = stats.kendalltau([r.N for r in rows], tv).statistic
        return float(tau), bool(all(b < a for a, b in zip(tv, tv[1:])))


def _path_label(path, partitions):
    return "|".join(partitions[k].label() for k in path)


def run_fdd_experiment(config, n=None, times=None):
    """Joint law of the genealogy of ``n`` leaves at rescaled ``times``.

    Writes ``fdd.csv`` (one row per scheme and N), ``fdd_law.csv`` (the
    three laws per path) and ``fdd_trend.csv``.
    """
    n = config.fdd_n if n is None else int(n)
    times = tuple(config.times if times is None else (float(t) for t in times))
    if n not in (2, 3):
        raise ConfigurationError("the fdd experiment supports n = 2 or n = 3")
    if not times or times[0] < 0 or any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigurationError("times must be nonnegative and strictly increasing")
    if n > min(config.particles):
        raise ConfigurationError(f"n = {n} exceeds the smallest N")
    observations = _prepare(config)
    paths, exact = kingman.fdd_law(n, times)
    records = collect(config, lambda N: CollectRequest((), n, times), observations)
    index = {p: k for k, p in enumerate(paths)}
    rows, checks = [], 0
    for (scheme, n_particles), recs in records.items():
        kept = [r for r in recs if r.excluded is None]
        checks += sum(r.checks for r in recs)
        done = [r for r in kept if r.fdd_path is not None]
        sampled = np.zeros(len(paths))
        conditional = np.zeros(len(paths))
        for r in done:
            sampled[index[r.fdd_path]] += 1
            conditional += r.fdd_conditional
        if done:
            sampled /= len(done)
            conditional /= len(done)
            tv_s, tv_c = total_variation(sampled, exact), total_variation(conditional, exact)
        else:
            sampled[:] = conditional[:] = math.nan
            tv_s = tv_c = math.nan
        rows.append(FddRow(scheme, n_particles, len(kept), len(kept) - len(done), tv_s, tv_c, sampled, conditional))
    report = FddReport(n, times, paths, exact, rows, checks)

    out = config.out_dir
    times_txt = ";".join(fmt(t) for t in times)
    files = {k: os.path.join(out, f"{k}.csv") for k in ("fdd", "fdd_law", "fdd_trend")}
    _write_csv(files["fdd"], ["scheme", "N", "n", "times", "tv_sampled", "tv_conditional", "censored", "replicates"],
               ([r.scheme, r.N, n, times_txt, r.tv_sampled, r.tv_conditional, r.censored, r.replicates]
                for r in rows))
    partitions = enumerate_partitions(n)
    _write_csv(files["fdd_law"], ["scheme", "N", "path", "kingman", "sampled", "conditional"],
               ([r.scheme, r.N, _path_label(p, partitions), exact[k], r.sampled[k], r.conditional[k]]
                for r in rows for k, p in enumerate(paths)))
    trend_rows = []
    for scheme in dict.fromkeys(r.scheme for r in rows):
        for estimator in ("sampled", "conditional"):
            tau, mono = report.trend(scheme, estimator)
            trend_rows.append([scheme, estimator, tau, mono])
    _write_csv(files["fdd_trend"], ["scheme", "estimator", "kendall_tau", "monotone_decreasing"], trend_rows)
    report.files = files
    return report


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    ci_low: float
    ci_high: float
    intercept: float
    r_value: float


@dataclass
class ScalingReport:
    """Log-log fits of tree-height moments against N for one leaf-set size."""

    n: int
    summary: HeightSummary
    mean_fits: dict
    var_fits: dict
    doubling: dict
    files: dict = field(default_factory=dict)


def fit_loglog(x, y, level=0.95):
    """Least-squares slope of ``log y`` on ``log x`` with a t-based confidence interval."""
    x, y = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    if x.size < 3:
        raise ConfigurationError("a scaling fit needs at least 3 distinct N")
    fit = stats.linregress(x, y)
    half = stats.t.ppf(0.5 + level / 2, x.size - 2) * fit.stderr
    return SlopeFit(float(fit.slope), float(fit.slope - half), float(fit.slope + half),
                    float(fit.intercept), float(fit.rvalue))


def run_scaling_experiment(config, n=None):
    """Fit mean and variance of the raw-generation tree height against N.

    Mean height should grow linearly in N and its variance like N squared.
    Writes ``scaling.csv`` and ``scaling_points.csv``.
    """
    n = config.scaling_n if n is None else int(n)
    if len(set(config.particles)) < 3:
        raise ConfigurationError("a scaling fit needs at least 3 distinct N")
    sub = config.replace(leaf_sizes=[n])
    observations = _prepare(sub)
    records = collect(sub, lambda N: CollectRequest((n,)), observations)
    summary = summarize(records, lambda N: [n])
    mean_fits, var_fits, doubling = {}, {}, {}
    for scheme in summary.schemes():
        rows = sorted(summary.select(scheme), key=lambda r: r.N)
        usable = [r for r in rows if r.mean_height > 0 and r.var_height > 0]
        if len(usable) >= 3:
            mean_fits[scheme] = fit_loglog([r.N for r in usable], [r.mean_height for r in usable])
            var_fits[scheme] = fit_loglog([r.N for r in usable], [r.var_height for r in usable])
        by_n = {r.N: r.mean_height for r in rows}
        top = max(by_n)
        doubling[scheme] = by_n[top] / by_n[top // 2] if top % 2 == 0 and top // 2 in by_n else math.nan
    report = ScalingReport(n, summary, mean_fits, var_fits, doubling)

    out = config.out_dir
    files = {"scaling": os.path.join(out, "scaling.csv"), "scaling_points": os.path.join(out, "scaling_points.csv")}
    fit_rows = []
    for scheme in summary.schemes():
        for quantity, fits in (("mean_height", mean_fits), ("var_height", var_fits)):
            f = fits.get(scheme)
            if f is not None:
                fit_rows.append([scheme, n, quantity, f.slope, f.ci_low, f.ci_high, f.intercept, f.r_value])
        fit_rows.append([scheme, n, "doubling_ratio", doubling[scheme], "", "", "", ""])
    _write_csv(files["scaling"], ["scheme", "n", "quantity", "slope", "ci_low", "ci_high", "intercept", "r_value"],
               fit_rows)
    _write_csv(files["scaling_points"], SUMMARY_HEADER, (r.as_row() for r in summary.rows))
    report.files = files
    return report
