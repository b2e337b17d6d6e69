"""State-space models driving the particle system.

A :class:`ModelSpec` bundles the initial law, the propagation kernel and the
log-potential of a Feynman-Kac style particle system. Every callable works on
whole particle arrays so the engine can stay vectorized. Two models ship with
the package: the discretised Ornstein-Uhlenbeck benchmark with a bootstrap
filter (:func:`bootstrap_model`) and the neutral model with unit potentials
(:func:`neutral_model`).
"""

import csv
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigurationError
from .seeding import make_rng

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ModelSpec:
    """Immutable description of a particle system.

    Attributes
    ----------
    initial_sampler : callable
        ``initial_sampler(rng, size)`` draws ``size`` states from the initial law.
    transition_sampler : callable
        ``transition_sampler(rng, parents, t)`` propagates the parent states
        into generation ``t``.
    log_potential : callable
        ``log_potential(parents, states, t)`` returns the log of the
        unnormalized weight of each particle in generation ``t``. At ``t = 0``
        ``parents`` is ``None``.
    horizon : int
        Number of forward steps ``T``; the run has ``T + 1`` generations.
    name : str
        Identifier written into run metadata.
    """

    initial_sampler: Callable
    transition_sampler: Callable
    log_potential: Callable
    horizon: int
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigurationError(f"horizon must be an integer >= 1, got {self.horizon!r}")

    def potential(self, parents, states, t):
        """Unnormalized weight ``g_t(parent, state)``."""
        return np.exp(self.log_potential(parents, states, t))


@dataclass(frozen=True)
class OuModelConfig:
    """Parameters of the discretised Ornstein-Uhlenbeck benchmark.

    ``observations`` is one sequence ``y_0..y_T``, or a ``(R, T + 1)`` array
    holding one sequence per row for batched runs.
    """

    step_size: float = 0.1
    obs_noise: float = 0.1
    observations: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("step_size", "obs_noise"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be a positive finite number, got {value!r}")
        if self.observations is not None:
            obs = np.asarray(self.observations, dtype=float)
            if obs.ndim not in (1, 2) or obs.shape[-1] < 2 or obs.size == 0:
                raise ConfigurationError("observations must hold at least two entries per sequence")
            if not np.all(np.isfinite(obs)):
                raise ConfigurationError("observations must be finite")
            object.__setattr__(self, "observations", obs)

    @property
    def horizon(self):
        if self.observations is None:
            return None
        return self.observations.shape[-1] - 1

    def with_observations(self, observations):
        return OuModelConfig(self.step_size, self.obs_noise, observations)


def initial_density(x):
    """Standard normal density of the initial law."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x - 0.5 * LOG_2PI)


def transition_density(config, x, x_new):
    """Density of one Ornstein-Uhlenbeck step from ``x`` to ``x_new``."""
    d = config.step_size
    r = np.asarray(x_new, dtype=float) - (1.0 - d) * np.asarray(x, dtype=float)
    return np.exp(-0.5 * r * r / d - 0.5 * (LOG_2PI + math.log(d)))


def emission_log_density(config, x, y):
    """Log of the Gaussian emission density of ``y`` given state ``x``."""
    s2 = config.obs_noise ** 2
    r = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    return -0.5 * r * r / s2 - 0.5 * (LOG_2PI + math.log(s2))


def emission_density(config, x, y):
    return np.exp(emission_log_density(config, x, y))


def simulate_ou_trajectory(config, horizon, seed):
    """Simulate hidden states and observations of the benchmark model.

    Parameters
    ----------
    config : OuModelConfig
        Step size and observation noise; stored observations are ignored.
    horizon : int
        Number of steps; ``horizon + 1`` states and observations are returned.
    seed : int, SeedSequence or Generator

    Returns
    -------
    states, observations : ndarray
    """
    if not isinstance(config, OuModelConfig):
        raise ConfigurationError("config must be an OuModelConfig")
    if int(horizon) != horizon or horizon < 1:
        raise ConfigurationError(f"horizon must be an integer >= 1, got {horizon!r}")
    horizon = int(horizon)
    rng = make_rng(seed)
    innovations = rng.standard_normal(horizon + 1)
    noise = rng.standard_normal(horizon + 1)
    drive = math.sqrt(config.step_size) * innovations
    drive[0] = innovations[0]
    # x_t = (1 - step) x_{t-1} + sqrt(step) xi_t as a first-order recursive filter
    states = lfilter([1.0], [1.0, -(1.0 - config.step_size)], drive)
    observations = states + config.obs_noise * noise
    return states, observations


def _standard_normal(rng, size):
    return rng.standard_normal(size)


def _ou_step(a, b, rng, parents, t):
    return a * parents + b * rng.standard_normal(parents.shape)


def _emission_log_potential(observations, inv_two_s2, log_norm, parents, states, t):
    r = observations[t] - states
    return log_norm - inv_two_s2 * r * r


def bootstrap_model(config):
    """Bootstrap particle filter for the Ornstein-Uhlenbeck benchmark.

    Particles are proposed from the OU transition and weighted by the
    Gaussian emission density of the observation of their own generation.
    With a ``(R, T + 1)`` observation array the model drives
    :func:`~smc_genealogy.engine.run_smc_batch` with ``R`` rows, row ``r``
    filtering its own sequence.
    """
    if not isinstance(config, OuModelConfig):
        raise ConfigurationError("config must be an OuModelConfig")
    if config.observations is None:
        raise ConfigurationError("bootstrap_model needs observations")
    obs = np.array(config.observations, dtype=float)
    horizon = obs.shape[-1] - 1
    if obs.ndim == 2:
        # obs[t] has shape (R, 1) and broadcasts against (R, N) particle blocks
        obs = np.ascontiguousarray(obs.T)[:, :, None]
    obs.setflags(write=False)
    s2 = config.obs_noise ** 2
    return ModelSpec(
        initial_sampler=_standard_normal,
        transition_sampler=partial(_ou_step, 1.0 - config.step_size, math.sqrt(config.step_size)),
        log_potential=partial(_emission_log_potential, obs, 0.5 / s2, -0.5 * (LOG_2PI + math.log(s2))),
        horizon=horizon,
        name="ou-bootstrap",
        params={"step_size": config.step_size, "obs_noise": config.obs_noise},
    )


def _keep(rng, parents, t):
    return parents.copy()


def _zero_log_potential(parents, states, t):
    return np.zeros(states.shape)


def neutral_model(horizon):
    """Model with ``g_t == 1``: weights stay uniform and states never matter."""
    return ModelSpec(
        initial_sampler=_standard_normal,
        transition_sampler=_keep,
        log_potential=_zero_log_potential,
        horizon=horizon,
        name="neutral",
    )


def write_observations_csv(path, observations):
    """Write observations as ``t,y`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "y"])
        for t, y in enumerate(np.asarray(observations, dtype=float)):
            writer.writerow([t, repr(float(y))])


def read_observations_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["t", "y"]:
            raise ConfigurationError(f"{path}: expected header t,y, got {reader.fieldnames}")
        rows = [(int(r["t"]), float(r["y"])) for r in reader]
    if [t for t, _ in rows] != list(range(len(rows))):
        raise ConfigurationError(f"{path}: t column must be 0, 1, 2, ...")
    return np.array([y for _, y in rows])
