"""Experiment configuration.

A config file is TOML with optional sections::

    seed = 1
    out_dir = "out"
    threads = 1
    replicates = 200

    [model]
    kind = "ou"            # or "neutral"
    step_size = 0.1
    obs_noise = 0.1
    observations = "per_replicate"   # or "shared": one trajectory for every run

    [smc]
    particles = [128, 256]
    schemes = ["multinomial", "residual", "stratified", "systematic"]
    permute = "auto"
    horizon_factor = 50    # T = horizon_factor * N unless horizon is set
    # horizon = 40960

    [genealogy]
    leaf_sizes = "pow2"    # 2, 4, ..., N for every N; or an explicit list
    times = [0.5, 1.0]
    fdd_n = 2
    scaling_n = 2
    write_traces = false

Command-line flags override file values.
"""

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Union

from ..errors import ConfigurationError
from ..resampling import PERMUTE_MODES, SCHEMES

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

MODELS = ("ou", "neutral")
OBSERVATION_MODES = ("per_replicate", "shared")
SECTIONS = {
    "model": {"kind": "model", "step_size": "step_size", "obs_noise": "obs_noise",
              "observations": "observations"},
    "smc": {"particles": "particles", "schemes": "schemes", "permute": "permute",
            "horizon_factor": "horizon_factor", "horizon": "horizon"},
    "genealogy": {"leaf_sizes": "leaf_sizes", "times": "times", "fdd_n": "fdd_n",
                  "scaling_n": "scaling_n", "write_traces": "write_traces"},
}
# Expected MRCA depth is about 2N generations; the horizon should leave room for ten times that.
HORIZON_SLACK = 10


@dataclass
class ExperimentConfig:
    model: str = "ou"
    step_size: float = 0.1
    obs_noise: float = 0.1
    observations: str = "per_replicate"
    particles: List[int] = field(default_factory=lambda: [64, 128, 256, 512])
    leaf_sizes: Union[str, List[int]] = "pow2"
    replicates: int = 200
    schemes: List[str] = field(default_factory=lambda: list(SCHEMES))
    permute: str = "auto"
    horizon_factor: float = 50.0
    horizon: Optional[int] = None
    seed: int = 1
    out_dir: str = "out"
    threads: int = 1
    times: List[float] = field(default_factory=lambda: [0.5, 1.0])
    fdd_n: int = 2
    scaling_n: int = 2
    write_traces: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.model not in MODELS:
            raise ConfigurationError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.observations not in OBSERVATION_MODES:
            raise ConfigurationError(f"observations must be one of {OBSERVATION_MODES}")
        for name in ("step_size", "obs_noise", "horizon_factor"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive, got {value!r}")
        if not self.particles:
            raise ConfigurationError("particles must list at least one N")
        self.particles = [int(n) for n in self.particles]
        if min(self.particles) < 2:
            raise ConfigurationError("every N must be >= 2")
        if not self.schemes:
            raise ConfigurationError("schemes must list at least one resampling scheme")
        for scheme in self.schemes:
            if scheme not in SCHEMES:
                raise ConfigurationError(f"unknown resampling scheme {scheme!r}")
        if self.permute not in PERMUTE_MODES:
            raise ConfigurationError(f"permute must be one of {PERMUTE_MODES}")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ConfigurationError("replicates must be an integer >= 1")
        if int(self.threads) != self.threads or self.threads < 1:
            raise ConfigurationError("threads must be an integer >= 1")
        if self.horizon is not None and (int(self.horizon) != self.horizon or self.horizon < 1):
            raise ConfigurationError("horizon must be an integer >= 1")
        if isinstance(self.leaf_sizes, str):
            if self.leaf_sizes != "pow2":
                raise ConfigurationError('leaf_sizes must be "pow2" or a list of integers')
        else:
            sizes = [int(n) for n in self.leaf_sizes]
            if not sizes or min(sizes) < 1:
                raise ConfigurationError("leaf sizes must be positive")
            if max(sizes) > min(self.particles):
                raise ConfigurationError(
                    f"leaf size {max(sizes)} exceeds the smallest particle count {min(self.particles)}")
            self.leaf_sizes = sizes
        times = [float(t) for t in self.times]
        if not times or times[0] < 0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("times must be nonnegative and strictly increasing")
        self.times = times
        for name in ("fdd_n", "scaling_n"):
            value = getattr(self, name)
            if int(value) != value or value < 1 or value > min(self.particles):
                raise ConfigurationError(f"{name} must lie in 1..min(particles)")
        return self

    def horizon_for(self, n_particles):
        if self.horizon is not None:
            return int(self.horizon)
        return int(round(self.horizon_factor * n_particles))

    def leaf_sizes_for(self, n_particles):
        if self.leaf_sizes == "pow2":
            out, k = [], 2
            while k <= n_particles:
                out.append(k)
                k *= 2
            return out
        return list(self.leaf_sizes)

    def check_horizons(self):
        """Warn when a horizon is short compared with the expected MRCA depth."""
        short = [n for n in self.particles if self.horizon_for(n) < HORIZON_SLACK * 2 * n]
        if short:
            warnings.warn(
                f"horizon below {HORIZON_SLACK} x 2N generations for N in {short}; "
                "expect censored genealogies", stacklevel=2)
        return short

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)


def load_config(path=None, **overrides):
    """Read a TOML config file (if given) and apply keyword overrides (``None`` values are ignored)."""
    values = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
        values = _flatten(raw, path)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def _flatten(raw, path):
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    out = {}
    for key, value in raw.items():
        if key in SECTIONS:
            if not isinstance(value, dict):
                raise ConfigurationError(f"{path}: [{key}] must be a table")
            for sub, sub_value in value.items():
                if sub not in SECTIONS[key]:
                    raise ConfigurationError(f"{path}: unknown key {key}.{sub}")
                out[SECTIONS[key][sub]] = sub_value
        elif key in fields:
            out[key] = value
        else:
            raise ConfigurationError(f"{path}: unknown key {key!r}")
    return out
