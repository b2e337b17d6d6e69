"""Genealogies of resampling particle systems.

Simulate weighted interacting particle systems, record the ancestry created
by resampling, and compare the genealogy of a few sampled leaves, on the
timescale given by the pairwise coalescence rate, with the Kingman
coalescent.
"""

from .engine import BatchHistory, ParticleHistory, ess, run_smc, run_smc_batch
from .errors import (ConfigurationError, DegenerateWeightsError, HorizonExhaustedError, InputError,
                     InvariantViolation, NumericError, SizeGuardError, SMCGenealogyError)
from .genealogy import (CoalescenceSeries, GenealogyTrace, c_n_stat, d_n_stat, offspring_counts,
                        time_change, trace_genealogy, transition_matrix_given_counts,
                        transition_probability, tree_height)
from .model import ModelSpec, OuModelConfig, bootstrap_model, neutral_model, simulate_ou_trajectory
from .partitions import Partition, enumerate_partitions
from .resampling import resample, resample_rows

__version__ = "0.1.0"
