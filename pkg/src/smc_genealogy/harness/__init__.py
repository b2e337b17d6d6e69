"""Batch experiments on particle genealogies: configuration, collection, CSV and SVG output."""

from .config import ExperimentConfig, load_config
from .experiments import (FddReport, HeightSummary, ScalingReport, run_fdd_experiment, run_height_experiment,
                          run_scaling_experiment)
from .plots import emit_plots
