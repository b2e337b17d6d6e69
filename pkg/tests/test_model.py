import math

import numpy as np
import pytest

from smc_genealogy.errors import ConfigurationError
from smc_genealogy.model import (OuModelConfig, bootstrap_model, emission_density, initial_density,
                                 neutral_model, read_observations_csv, simulate_ou_trajectory,
                                 write_observations_csv)


def test_trajectory_length_long_horizon():
    states, obs = simulate_ou_trajectory(OuModelConfig(), 40960, seed=1)
    assert states.shape == obs.shape == (40961,)


def test_unit_step_gives_independent_states():
    # with step 1 the autoregressive term vanishes: X_t = xi_t
    states, _ = simulate_ou_trajectory(OuModelConfig(step_size=1.0), 20000, seed=2)
    assert abs(states.mean()) < 4 / math.sqrt(states.size)
    assert abs(states.var() - 1.0) < 0.05
    assert abs(np.corrcoef(states[:-1], states[1:])[0, 1]) < 4 / math.sqrt(states.size)


def test_trajectory_is_deterministic():
    a = simulate_ou_trajectory(OuModelConfig(), 500, seed=9)
    b = simulate_ou_trajectory(OuModelConfig(), 500, seed=9)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_increment_moments():
    cfg = OuModelConfig(step_size=0.1)
    states, _ = simulate_ou_trajectory(cfg, 100_000, seed=3)
    inc = states[1:] - (1 - cfg.step_size) * states[:-1]
    se = math.sqrt(cfg.step_size / inc.size)
    assert abs(inc.mean()) < 4 * se
    assert abs(inc.var() / cfg.step_size - 1) < 0.05


def test_observation_noise():
    cfg = OuModelConfig(obs_noise=0.3)
    states, obs = simulate_ou_trajectory(cfg, 50_000, seed=4)
    resid = obs - states
    assert abs(resid.std() / 0.3 - 1) < 0.02


@pytest.mark.parametrize("kwargs", [{"step_size": 0.0}, {"step_size": -1}, {"obs_noise": 0},
                                    {"obs_noise": float("nan")}])
def test_invalid_config(kwargs):
    with pytest.raises(ConfigurationError):
        OuModelConfig(**kwargs)


def test_bootstrap_needs_observations():
    with pytest.raises(ConfigurationError):
        bootstrap_model(OuModelConfig())
    with pytest.raises(ConfigurationError):
        OuModelConfig(observations=[1.0])


def test_potential_at_mode_and_one_sigma():
    y = np.array([0.3, -0.2, 1.1])
    model = bootstrap_model(OuModelConfig(obs_noise=0.1, observations=y))
    mode = model.potential(np.zeros(1), np.array([y[2]]), 2)[0]
    assert mode == pytest.approx(1 / math.sqrt(2 * math.pi * 0.01), rel=1e-12)
    assert mode == pytest.approx(3.98942, abs=1e-5)
    off = model.potential(np.zeros(1), np.array([y[2] + 0.1]), 2)[0]
    assert off == pytest.approx(mode * math.exp(-0.5), rel=1e-12)
    assert emission_density(OuModelConfig(obs_noise=0.1), y[2], y[2]) == pytest.approx(mode)


def test_initial_density_at_zero():
    assert initial_density(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert initial_density(0.0) == pytest.approx(0.39894, abs=1e-5)


def test_potential_ignores_parent_state():
    y = np.linspace(-1, 1, 6)
    model = bootstrap_model(OuModelConfig(observations=y))
    x = np.array([0.1, 0.4, -2.0])
    a = model.log_potential(np.array([5.0, -5.0, 0.0]), x, 3)
    b = model.log_potential(np.array([0.0, 1.0, 9.0]), x, 3)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(model.log_potential(None, x, 0), model.log_potential(x, x, 0))


def test_horizon_from_observations():
    assert bootstrap_model(OuModelConfig(observations=np.zeros(11))).horizon == 10
    rows = np.zeros((3, 11))
    assert bootstrap_model(OuModelConfig(observations=rows)).horizon == 10


def test_row_observations_broadcast():
    rows = np.array([[0.0, 1.0, 2.0], [5.0, 6.0, 7.0]])
    model = bootstrap_model(OuModelConfig(observations=rows))
    states = np.array([[1.0, 0.0], [6.0, 0.0]])
    lp = model.log_potential(None, states, 1)
    assert lp.shape == (2, 2)
    assert lp[0, 0] == pytest.approx(lp[1, 0])


def test_neutral_model():
    model = neutral_model(5)
    x = np.arange(4.0)
    np.testing.assert_array_equal(model.transition_sampler(None, x, 1), x)
    np.testing.assert_array_equal(model.potential(x, x, 1), np.ones(4))


def test_observations_csv_roundtrip(tmp_path):
    _, obs = simulate_ou_trajectory(OuModelConfig(), 20, seed=5)
    path = tmp_path / "obs.csv"
    write_observations_csv(path, obs)
    assert path.read_text().splitlines()[0] == "t,y"
    np.testing.assert_array_equal(read_observations_csv(path), obs)
    path.write_text("t,x\n0,1.0\n")
    with pytest.raises(ConfigurationError):
        read_observations_csv(path)
