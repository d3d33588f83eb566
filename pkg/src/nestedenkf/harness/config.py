"""Experiment configuration: declarative defaults, YAML files, CLI overrides.

Field defaults reproduce the reference experimental setup: 8 large-scale
variables, observation error variance 1 on every variable each 0.05 time
units (10 forecast steps), 30-member inner ensembles, 15 independent
ensembles, parameter updates every 5 state cycles, 1000 outer cycles, and
verification that excludes the first 200 state cycles.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import yaml

from ..dynamics import DEFAULT_FORCING
from ..errors import ConfigError
from ..etkf import DEFAULT_PHI
from ..stochastic import COVARIANCE_MODELS

KINDS = ("twin", "imperfect", "exhaustive", "residual-diag")


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete declarative description of one experiment."""

    kind: str = "twin"

    # Two-scale model constants (nature model of imperfect experiments);
    # n_fast counts small-scale variables per large-scale variable.
    n_vars: int = 8
    n_fast: int = 32
    forcing: float = 20.0
    coupling_h: float = 1.0
    coupling_b: float = 10.0
    coupling_c: float = 10.0

    # Integration and observations.
    dt_truncated: float = 0.005
    dt_two_scale: float = 0.001
    obs_interval: float = 0.05
    r_var: float = 1.0
    nature_spinup: float = 1460.0

    # Nature system: "truncated" (stochastic twin) or "two_scale"; None
    # derives it from kind (imperfect -> two_scale, everything else ->
    # truncated), letting exhaustive searches target either nature.
    nature_model: str | None = None

    # Stochastic parameterization.
    cov_model: str = "iso_diag"
    nature_theta: tuple | None = (2.0,)
    prior_mean: tuple | None = None
    prior_std: tuple | None = None
    phi: float = DEFAULT_PHI

    # Deterministic effective forcing of the forecast model.
    a0: float = DEFAULT_FORCING.a0
    a1: float = DEFAULT_FORCING.a1
    refit_forcing: bool = False

    # Filter dimensions.
    n_members: int = 30
    n_ensembles: int = 15
    k_window: int = 5
    n_outer: int = 1000
    spinup_cycles_excluded: int = 200
    tail_window: int = 200

    # Initial-condition pool (attractor snapshots).
    pool_snapshots: int = 64
    pool_spacing: float = 5.0

    # Run control.
    replicates: int = 1
    master_seed: int = 0
    diag_shortcut: bool = False
    inflation: float = 1.0
    n_jobs: int = 1

    # Exhaustive search: parameter name -> (start, stop, step), plus the
    # state-only run length (total cycles; the first exhaustive_spinup are
    # excluded from scoring).
    grid: dict | None = None
    exhaustive_cycles: int = 2300
    exhaustive_spinup: int = 200

    # Residual diagnostic.
    residual_duration: float = 10000.0
    residual_spinup: float = 20.0

    out_dir: str = "runs"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.cov_model not in COVARIANCE_MODELS:
            raise ConfigError(
                f"unknown covariance model {self.cov_model!r}; expected one "
                f"of {sorted(COVARIANCE_MODELS)}")
        for name, dt in (("dt_truncated", self.dt_truncated),
                         ("dt_two_scale", self.dt_two_scale)):
            if dt <= 0:
                raise ConfigError(f"{name} must be positive")
            steps = self.obs_interval / dt
            if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
                raise ConfigError(
                    f"obs_interval={self.obs_interval} is not a positive "
                    f"integer multiple of {name}={dt}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.n_members < 2:
            raise ConfigError("n_members must be >= 2")
        if self.n_ensembles < 2:
            raise ConfigError("n_ensembles must be >= 2")
        if self.k_window < 1 or self.n_outer < 0:
            raise ConfigError("k_window must be >= 1 and n_outer >= 0")
        if self.inflation <= 0:
            raise ConfigError("inflation must be positive")
        if self.r_var < 0:
            raise ConfigError("r_var must be nonnegative")
        if not 0 <= self.phi < 1:
            raise ConfigError("phi must lie in [0, 1)")
        if self.tail_window < 1:
            raise ConfigError("tail_window must be >= 1")
        model = COVARIANCE_MODELS[self.cov_model](self.n_vars)
        for label, values in (("nature_theta", self.nature_theta),
                              ("prior_mean", self.prior_mean),
                              ("prior_std", self.prior_std)):
            if values is not None and len(values) != model.dim:
                raise ConfigError(
                    f"{label} must have {model.dim} entries for model "
                    f"{self.cov_model!r}, got {len(values)}")
        if (self.prior_mean is None) != (self.prior_std is None):
            raise ConfigError("prior_mean and prior_std must be given together")
        if self.n_fast < 1:
            raise ConfigError("n_fast must be >= 1")
        if self.exhaustive_spinup >= self.exhaustive_cycles:
            raise ConfigError("exhaustive_spinup must be < exhaustive_cycles")
        if self.residual_duration <= 0:
            raise ConfigError("residual_duration must be positive")
        if self.nature_model not in (None, "truncated", "two_scale"):
            raise ConfigError(
                f"nature_model must be 'truncated' or 'two_scale', got "
                f"{self.nature_model!r}")

    @property
    def steps_per_cycle(self):
        return round(self.obs_interval / self.dt_truncated)

    @property
    def resolved_nature_model(self):
        if self.nature_model is not None:
            return self.nature_model
        return "two_scale" if self.kind == "imperfect" else "truncated"

    def covariance_model(self):
        return COVARIANCE_MODELS[self.cov_model](self.n_vars)

    def theta_grid(self):
        """Expand the grid mapping into a (n_points, dim) lattice.

        Every parameter of the covariance model must appear in the mapping;
        points are ordered with the last parameter varying fastest.
        """
        model = self.covariance_model()
        if not self.grid:
            raise ConfigError("exhaustive search needs a nonempty grid")
        unknown = set(self.grid) - set(model.names)
        if unknown:
            raise ConfigError(
                f"grid names {sorted(unknown)} not in model parameters "
                f"{model.names}")
        axes = []
        for name in model.names:
            if name not in self.grid:
                raise ConfigError(f"grid is missing parameter {name!r}")
            start, stop, step = (float(v) for v in self.grid[name])
            if step <= 0 or stop < start:
                raise ConfigError(f"bad grid range for {name!r}")
            axes.append(np.round(np.arange(start, stop + step / 2, step), 10))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


_FIELD_NAMES = {f.name for f in dataclasses.fields(ExperimentConfig)}
_TUPLE_FIELDS = ("nature_theta", "prior_mean", "prior_std")


def config_from_mapping(mapping):
    """Build a config from a plain mapping, rejecting unknown keys."""
    if not isinstance(mapping, dict):
        raise ConfigError(f"config must be a mapping, got {type(mapping).__name__}")
    unknown = set(mapping) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    clean = dict(mapping)
    for name in _TUPLE_FIELDS:
        if clean.get(name) is not None:
            clean[name] = tuple(float(v) for v in clean[name])
    if clean.get("grid") is not None:
        grid = clean["grid"]
        if not isinstance(grid, dict):
            raise ConfigError("grid must map parameter names to "
                              "[start, stop, step]")
        clean["grid"] = {str(k): tuple(float(x) for x in v)
                         for k, v in grid.items()}
    return ExperimentConfig(**clean)


def load_config(path):
    """Load an ExperimentConfig from a YAML file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    try:
        return config_from_mapping(raw)
    except ConfigError as err:
        raise ConfigError(f"{path}: {err}") from err


def apply_overrides(cfg, **overrides):
    """Return cfg with the non-None overrides substituted."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    if not changes:
        return cfg
    unknown = set(changes) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config overrides: {sorted(unknown)}")
    return dataclasses.replace(cfg, **changes)
