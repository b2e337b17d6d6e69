from pathlib import Path

import pytest

from smc_genealogy.errors import ConfigurationError
from smc_genealogy.harness import ExperimentConfig, load_config

PRESETS = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("name", ["desk", "full", "neutral"])
def test_presets_load(name):
    cfg = load_config(PRESETS / f"{name}.toml")
    assert cfg.replicates >= 200


def test_full_preset_sizes():
    cfg = load_config(PRESETS / "full.toml")
    assert cfg.particles == [8192] and cfg.horizon_for(8192) == 40960 and cfg.observations == "shared"
    assert cfg.leaf_sizes_for(8192)[-1] == 8192


def test_overrides_win(tmp_path):
    cfg = load_config(PRESETS / "desk.toml", replicates=3, seed=None)
    assert cfg.replicates == 3 and cfg.seed == 1


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.horizon_for(64) == 3200
    assert cfg.leaf_sizes_for(16) == [2, 4, 8, 16]


@pytest.mark.parametrize("text", [
    "bogus = 1",
    "[smc]\nwhatever = 2",
    "smc = 3",
    "[model]\nkind = 'lorenz'",
    "[smc]\nparticles = []",
    "[smc]\nschemes = ['nope']",
    "replicates = 0",
    "[model]\nobservations = 'sometimes'",
    "[genealogy]\ntimes = [1.0, 0.5]",
    "not toml ===",
])
def test_bad_files(tmp_path, text):
    path = tmp_path / "c.toml"
    path.write_text(text)
    with pytest.raises(ConfigurationError):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "absent.toml")


def test_short_horizon_warns():
    with pytest.warns(UserWarning):
        ExperimentConfig(particles=[64], horizon=100).check_horizons()
