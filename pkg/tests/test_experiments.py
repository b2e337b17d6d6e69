import csv
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from smc_genealogy.errors import ConfigurationError, InputError
from smc_genealogy.harness import ExperimentConfig
from smc_genealogy.harness.experiments import (EXCLUSIONS_HEADER, HEIGHTS_HEADER, SUMMARY_HEADER, fit_loglog,
                                               read_summary_csv, run_fdd_experiment, run_height_experiment,
                                               run_scaling_experiment, total_variation)
from smc_genealogy.harness.plots import emit_plots, render_svg

SVG = "{http://www.w3.org/2000/svg}"


def small(tmp_path, **kw):
    base = dict(model="ou", particles=[8], replicates=4, horizon_factor=8, out_dir=str(tmp_path))
    base.update(kw)
    return ExperimentConfig(**base)


def header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def test_height_files_and_headers(tmp_path):
    s = run_height_experiment(small(tmp_path, write_traces=True))
    assert header(s.files["heights"]) == HEIGHTS_HEADER
    assert header(s.files["summary"]) == SUMMARY_HEADER
    assert header(s.files["exclusions"]) == EXCLUSIONS_HEADER
    assert header(s.files["traces"]) == ["replicate", "n", "generation", "num_blocks"]
    assert len(s.rows) == 4 * 3  # schemes x leaf sizes 2, 4, 8
    assert s.invariant_checks > 0
    assert not (tmp_path / "observations.csv").exists()
    back = read_summary_csv(s.files["summary"])
    assert [r.as_row()[:3] for r in back.rows] == [r.as_row()[:3] for r in s.rows]


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_height_experiment(small(a, replicates=3))
    run_height_experiment(small(b, replicates=3))
    for name in ("heights.csv", "summary.csv", "exclusions.csv", "heights_mean_N8.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_single_replicate_is_deterministic(tmp_path):
    cfg = lambda d: small(d, replicates=1, schemes=["stratified"], leaf_sizes=[2])
    a = run_height_experiment(cfg(tmp_path / "a"))
    run_height_experiment(cfg(tmp_path / "b"))
    assert len(a.rows) == 1 and a.rows[0].var_height == 0.0
    for name in ("heights.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_shared_observations_written(tmp_path):
    run_height_experiment(small(tmp_path, observations="shared", schemes=["systematic"]), plots=False)
    assert (tmp_path / "observations.csv").exists()


def test_empty_scheme_list_rejected(tmp_path):
    with pytest.raises(ConfigurationError):
        run_height_experiment(small(tmp_path, schemes=[]))


def test_leaf_size_above_n_rejected(tmp_path):
    with pytest.raises(ConfigurationError):
        run_height_experiment(small(tmp_path, leaf_sizes=[16]))


def test_plots_have_one_polyline_per_scheme(tmp_path):
    s = run_height_experiment(small(tmp_path, particles=[256], replicates=2), plots=False)
    files = emit_plots(s, str(tmp_path))
    assert len(files) == 2
    for path in files:
        root = ET.parse(path).getroot()
        lines = root.findall(f"{SVG}polyline")
        assert len(lines) == 4
        assert {ln.find(f"{SVG}title").text for ln in lines} == set(s.schemes())
        assert all(len(ln.get("points").split()) == 8 for ln in lines)


def test_render_rejects_all_missing():
    with pytest.raises(InputError):
        render_svg({"a": [(2, math.nan)]}, "t", "y")


def test_fdd_zero_time_on_singletons(tmp_path):
    cfg = ExperimentConfig(model="neutral", particles=[8], replicates=20, schemes=["multinomial"],
                           horizon_factor=30, out_dir=str(tmp_path))
    rep = run_fdd_experiment(cfg, n=2, times=(0.0, 1.0))
    row = rep.rows[0]
    first = np.array([p[0] for p in rep.paths])
    assert row.conditional[first != 0].sum() == 0
    assert row.sampled[first != 0].sum() == 0
    assert rep.exact[first != 0].sum() == 0
    assert header(rep.files["fdd"])[:4] == ["scheme", "N", "n", "times"]


def test_fdd_rejects_bad_times(tmp_path):
    with pytest.raises(ConfigurationError):
        run_fdd_experiment(small(tmp_path), n=2, times=(1.0, 0.5))
    with pytest.raises(ConfigurationError):
        run_fdd_experiment(small(tmp_path), n=4, times=(1.0,))


def test_scaling_needs_three_n(tmp_path):
    with pytest.raises(ConfigurationError):
        run_scaling_experiment(small(tmp_path, particles=[8, 16]), n=2)


def test_scaling_report(tmp_path):
    cfg = ExperimentConfig(model="neutral", particles=[8, 16, 32], replicates=60, schemes=["multinomial"],
                           horizon_factor=30, out_dir=str(tmp_path))
    rep = run_scaling_experiment(cfg, n=2)
    assert 0.5 < rep.mean_fits["multinomial"].slope < 1.5
    assert rep.doubling["multinomial"] > 1
    assert header(rep.files["scaling"])[0] == "scheme"


def test_fit_loglog_exact_power():
    x = np.array([2.0, 4.0, 8.0, 16.0])
    f = fit_loglog(x, 3 * x ** 2)
    assert f.slope == pytest.approx(2.0)
    assert f.ci_low <= 2.0 <= f.ci_high


def test_total_variation():
    assert total_variation([1, 0], [0, 1]) == 1.0
    assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0


def test_replicate_counts_and_monotone_heights(tmp_path):
    s = run_height_experiment(small(tmp_path, particles=[16], replicates=30, horizon_factor=50), plots=False)
    for scheme in s.schemes():
        rows = sorted(s.select(scheme, 16), key=lambda r: r.n)
        assert all(r.replicates == 30 - s.excluded[(scheme, 16)] for r in rows)
        for a, b in zip(rows, rows[1:]):
            pooled = math.sqrt(a.var_height / a.replicates + b.var_height / b.replicates)
            assert b.mean_height >= a.mean_height - 2 * pooled
