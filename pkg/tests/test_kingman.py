import math

import numpy as np
import pytest
from scipy import stats

from smc_genealogy.errors import InputError, SizeGuardError
from smc_genealogy.kingman import (build_generator, fdd_law, height_moments, sample_partitions_at,
                                   sample_tree_heights, simulate_coalescent, transition_matrix,
                                   write_matrix_csv)
from smc_genealogy.partitions import Partition, enumerate_partitions


def test_simulate_path_structure(rng):
    for n in (2, 5, 9):
        real = simulate_coalescent(n, rng)
        assert real.waiting_times.shape == (n - 1,)
        assert (real.waiting_times > 0).all()
        assert real.height == pytest.approx(real.waiting_times.sum())
        assert [len(p) for p in real.path] == list(range(n, 0, -1))
        assert real.path[0] == Partition.singletons(n) and real.path[-1] == Partition.trivial(n)
        assert all(b.is_coarsening_of(a) for a, b in zip(real.path, real.path[1:]))
        assert real.partition_at(0.0) == real.path[0]
        assert real.partition_at(real.height + 1) == real.path[-1]
    with pytest.raises(InputError):
        simulate_coalescent(1, rng)


def test_first_merge_uniform(rng):
    firsts = [simulate_coalescent(3, rng).path[1].label() for _ in range(30_000)]
    labels, counts = np.unique(firsts, return_counts=True)
    assert len(labels) == 3
    p = counts / counts.sum()
    se = math.sqrt((1 / 3) * (2 / 3) / counts.sum())
    assert (np.abs(p - 1 / 3) < 5 * se).all()


def test_pair_height_exp1(rng):
    h = sample_tree_heights(2, 1_000_000, rng)
    assert abs(h.mean() - 1) < 4 * h.std() / 1000


@pytest.mark.parametrize("n", [2, 5, 10])
def test_height_moments_against_simulation(n, rng):
    h = sample_tree_heights(n, 1_000_000, rng)
    mean, var = height_moments(n)
    size = h.size
    assert abs(h.mean() - mean) < 5 * math.sqrt(var / size)
    # standard error of the sample variance from the fourth central moment
    m4 = np.mean((h - h.mean()) ** 4)
    assert abs(h.var(ddof=1) - var) < 5 * math.sqrt((m4 - var ** 2) / size)


def test_sampled_heights_match_direct_simulation(rng):
    direct = np.array([simulate_coalescent(6, rng).height for _ in range(20_000)])
    fast = sample_tree_heights(6, 20_000, rng)
    assert stats.ks_2samp(direct, fast).pvalue > 1e-3


def test_height_moment_examples():
    assert height_moments(2) == (1.0, 1.0)
    assert height_moments(10)[0] == pytest.approx(1.8)
    assert abs(height_moments(10_000)[1] - (4 * math.pi ** 2 / 3 - 12)) < 1e-3
    with pytest.raises(InputError):
        height_moments(1)


def test_generator_examples():
    q2 = build_generator(2)
    np.testing.assert_array_equal(q2.matrix, [[-1, 1], [0, 0]])
    q3 = build_generator(3)
    assert q3.matrix[0, 0] == -3 and (q3.matrix[0, 1:4] == 1).all() and q3.matrix[0, 4] == 0
    for n in range(2, 7):
        q = build_generator(n)
        np.testing.assert_allclose(q.matrix.sum(axis=1), 0, atol=1e-12)
        off = q.matrix[~np.eye(q.matrix.shape[0], dtype=bool)]
        assert set(np.unique(off)) <= {0.0, 1.0}
        for i, xi in enumerate(q.partitions):
            assert q.matrix[i, i] == -len(xi) * (len(xi) - 1) / 2
    with pytest.raises(SizeGuardError):
        build_generator(7)
    assert build_generator(3).labels()[2] == "{1,3}{2}"


def test_transition_matrix_examples():
    q = build_generator(2)
    np.testing.assert_array_equal(transition_matrix(q, 0.0), np.eye(2))
    assert transition_matrix(q, 1.0)[0, 0] == pytest.approx(0.367879441171, abs=1e-9)
    for n in (3, 4, 5):
        q = build_generator(n)
        for t in (0.1, 0.5, 1.0, 2.0):
            p = transition_matrix(q, t)
            np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-10)
            assert ((p >= 0) & (p <= 1)).all()
        np.testing.assert_allclose(transition_matrix(q, 0.7), transition_matrix(q, 0.3) @ transition_matrix(q, 0.4),
                                   atol=1e-9)
    with pytest.raises(InputError):
        transition_matrix(q, float("nan"))
    with pytest.raises(InputError):
        transition_matrix(q, -1.0)


def test_transition_matrix_against_scipy():
    from scipy.linalg import expm
    q = build_generator(4)
    for t in (0.05, 1.3, 7.0):
        np.testing.assert_allclose(transition_matrix(q, t), expm(q.matrix * t), atol=1e-11)


def test_fdd_law_pair_closed_form():
    paths, probs = fdd_law(2, [0.5, 1.0])
    law = dict(zip(paths, probs))
    assert law[(0, 0)] == pytest.approx(math.exp(-1.0), abs=1e-12)
    assert law[(0, 1)] == pytest.approx(math.exp(-0.5) - math.exp(-1.0), abs=1e-12)
    assert law[(1, 1)] == pytest.approx(1 - math.exp(-0.5), abs=1e-12)
    assert law[(1, 0)] == 0
    assert sum(probs) == pytest.approx(1.0)


def test_simulated_fdd_matches_exponential(rng):
    times = [0.5, 1.0]
    codes = sample_partitions_at(3, times, 1_000_000, rng)
    paths, probs = fdd_law(3, times)
    # fdd_law lists paths in itertools.product order
    flat = codes[:, 0] * len(enumerate_partitions(3)) + codes[:, 1]
    observed = np.bincount(flat, minlength=len(paths))
    keep = probs > 0
    assert observed[~keep].sum() == 0
    expected = probs[keep] * codes.shape[0]
    assert stats.chisquare(observed[keep], expected).pvalue > 1e-3


def test_sample_partitions_match_path_simulation(rng):
    t = 0.4
    direct = [simulate_coalescent(3, rng).partition_at(t) for _ in range(20_000)]
    parts = enumerate_partitions(3)
    a = np.bincount([parts.index(p) for p in direct], minlength=5)
    b = np.bincount(sample_partitions_at(3, [t], 20_000, rng)[:, 0], minlength=5)
    assert stats.chi2_contingency(np.array([a, b])[:, (a + b) > 0]).pvalue > 1e-3


def test_matrix_csv(tmp_path):
    q = build_generator(3)
    write_matrix_csv(tmp_path / "q.csv", q.matrix, q.partitions)
    lines = (tmp_path / "q.csv").read_text().splitlines()
    assert lines[0] == 'partition,{1}{2}{3},"{1}{2,3}","{1,3}{2}","{1,2}{3}","{1,2,3}"'
    assert lines[1].startswith("{1}{2}{3},-3.0,1.0")
