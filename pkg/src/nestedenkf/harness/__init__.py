"""Experiment orchestration: configs, seeding, protocols, file I/O, CLI."""

from .config import ExperimentConfig, apply_overrides, load_config
from .experiments import (GridResult, ResidualResult, RunSummary,
                          exhaustive_search, residual_covariance,
                          residual_covariance_diagnostic,
                          run_imperfect_experiment, run_replicate,
                          run_twin_experiment)
from .observations import (draw_members, initial_condition_pool,
                           make_observations, model_consts, nature_run)
from .seeding import forecast_streams, seed_stream

__all__ = [
    "ExperimentConfig", "GridResult", "ResidualResult", "RunSummary",
    "apply_overrides", "draw_members", "exhaustive_search",
    "forecast_streams", "initial_condition_pool", "load_config",
    "make_observations", "model_consts", "nature_run", "residual_covariance",
    "residual_covariance_diagnostic", "run_imperfect_experiment",
    "run_replicate", "run_twin_experiment", "seed_stream",
]
