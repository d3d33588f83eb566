"""The four experiment protocols: twin, imperfect-model, exhaustive, residual.

Every protocol is a pure function of (config, master seed): all randomness
flows through purpose-keyed streams (see seeding), so results are
bit-identical across reruns and worker counts.  Replicates differ in
observation noise, stochastic forcing, initial states, and parameter priors.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import partial

import numpy as np
from joblib import Parallel, delayed

from ..dynamics import DetParams, fit_deterministic_params, generate_nature_run
from ..errors import ConfigError
from ..estimator import default_prior
from ..etkf import etkf_analysis, forecast_ensemble, make_inner_ensemble, state_rmse
from ..nested import WindowConfig, make_outer_bank, nested_assimilation
from .config import ExperimentConfig
from .observations import (draw_members, initial_condition_pool,
                           make_observations, model_consts, nature_run)
from .seeding import forecast_streams, seed_stream


@dataclass(frozen=True)
class RunSummary:
    """Per-cycle series and tail statistics of one nested-filter replicate."""

    replicate: int
    master_seed: int
    parameter_names: tuple
    theta_mean: np.ndarray        # (L, p) outer-cycle parameter ensemble mean
    theta_spread: np.ndarray      # (L, p) outer-cycle parameter ensemble std
    rmse: np.ndarray              # (L*K,) per-inner-cycle analysis RMSE
    state_spread: np.ndarray      # (L*K,) per-inner-cycle mean member spread
    final_theta: np.ndarray       # (p,) theta mean averaged over the tail window
    final_theta_std: np.ndarray   # (p,) std of the same tail series
    final_spread: np.ndarray      # (p,) theta ensemble spread over the tail
    tail_rmse: float              # RMSE mean excluding the spinup cycles
    wall_clock: float

    def __post_init__(self):
        n_outer, p = self.theta_mean.shape
        if self.theta_spread.shape != (n_outer, p):
            raise ValueError("theta series shapes disagree")
        if n_outer and len(self.rmse) % n_outer:
            raise ValueError("inner series length is not a multiple of L")
        if len(self.state_spread) != len(self.rmse):
            raise ValueError("inner series lengths disagree")


@dataclass(frozen=True)
class GridResult:
    """Replicate-averaged state RMSE over a parameter lattice."""

    parameter_names: tuple
    points: np.ndarray       # (P, p)
    rmse: np.ndarray         # (P, R) per-replicate space-time mean RMSE
    wall_clock: float

    @property
    def rmse_mean(self):
        return self.rmse.mean(axis=1)

    @property
    def rmse_std(self):
        if self.rmse.shape[1] < 2:
            return np.zeros(len(self.points))
        return self.rmse.std(axis=1, ddof=1)

    @property
    def best_index(self):
        return int(np.argmin(self.rmse_mean))

    @property
    def best_point(self):
        return self.points[self.best_index]


@dataclass(frozen=True)
class ResidualResult:
    """Spatial covariance of the subgrid-forcing residual."""

    det: DetParams
    cov: np.ndarray            # (n, n) time-sample covariance
    by_distance: np.ndarray    # (n//2 + 1,) ring-distance-averaged covariances
    duration: float
    n_samples: int
    wall_clock: float


def _require_kind(cfg, kind):
    if cfg.kind != kind:
        raise ConfigError(f"expected a {kind!r} config, got {cfg.kind!r}")


def _resolve_prior(cfg, model):
    if cfg.prior_mean is not None:
        return np.asarray(cfg.prior_mean, dtype=float), np.asarray(
            cfg.prior_std, dtype=float)
    return default_prior(model)


def _resolve_forcing(cfg, nature):
    if cfg.refit_forcing:
        if nature.ys is None:
            raise ConfigError("refit_forcing needs a two-scale nature run")
        return fit_deterministic_params(nature, model_consts(cfg))
    return DetParams(cfg.a0, cfg.a1)


def _pmap(n_jobs, fn, items):
    if n_jobs == 1:
        return [fn(item) for item in items]
    return Parallel(n_jobs=n_jobs)(delayed(fn)(item) for item in items)


def run_replicate(cfg, replicate):
    """One nested-filter replicate: nature, observations, priors, filtering."""
    t0 = time.perf_counter()
    model = cfg.covariance_model()
    seed = cfg.master_seed
    n_cycles = cfg.n_outer * cfg.k_window

    nature = nature_run(cfg, n_cycles, seed_stream(seed, "nature", replicate))
    observations = make_observations(nature, np.arange(cfg.n_vars), cfg.r_var,
                                     cfg.obs_interval,
                                     seed_stream(seed, "obs", replicate))
    pool = initial_condition_pool(cfg, seed_stream(seed, "pool", replicate))

    mean, std = _resolve_prior(cfg, model)
    prior_rng = seed_stream(seed, "prior", replicate)
    thetas = mean + std * prior_rng.standard_normal((cfg.n_ensembles, model.dim))
    member_rng = seed_stream(seed, "members", replicate)
    ensembles = [
        make_inner_ensemble(draw_members(pool, cfg.n_members, member_rng),
                            thetas[j], model, member_rng, phi=cfg.phi)
        for j in range(cfg.n_ensembles)]
    bank = make_outer_bank(ensembles, cfg.k_window)

    window_cfg = WindowConfig(det=_resolve_forcing(cfg, nature),
                              dt=cfg.dt_truncated,
                              steps_per_cycle=cfg.steps_per_cycle,
                              inflation=cfg.inflation,
                              diag_shortcut=cfg.diag_shortcut)
    rngs = forecast_streams(seed, replicate, cfg.n_ensembles)
    _, diag = nested_assimilation(bank, observations, window_cfg, rngs,
                                  truth=nature.xs)
    return _summarize(cfg, replicate, model, diag,
                      time.perf_counter() - t0)


def _summarize(cfg, replicate, model, diag, wall_clock):
    n_outer, p = diag.theta_mean.shape
    tail = min(cfg.tail_window, n_outer)
    if n_outer:
        tail_means = diag.theta_mean[-tail:]
        tail_spreads = diag.theta_spread[-tail:]
        final_theta = tail_means.mean(axis=0)
        final_theta_std = (tail_means.std(axis=0, ddof=1) if tail > 1
                           else np.zeros(p))
        final_spread = tail_spreads.mean(axis=0)
    else:
        final_theta = np.full(p, np.nan)
        final_theta_std = np.full(p, np.nan)
        final_spread = np.full(p, np.nan)
    scored = diag.rmse[cfg.spinup_cycles_excluded:]
    tail_rmse = float(scored.mean()) if scored.size else float("nan")
    return RunSummary(replicate=replicate, master_seed=cfg.master_seed,
                      parameter_names=tuple(model.names),
                      theta_mean=diag.theta_mean,
                      theta_spread=diag.theta_spread, rmse=diag.rmse,
                      state_spread=diag.state_spread, final_theta=final_theta,
                      final_theta_std=final_theta_std,
                      final_spread=final_spread, tail_rmse=tail_rmse,
                      wall_clock=wall_clock)


def run_twin_experiment(cfg):
    """Stochastic twin experiments: nature and forecast share the model."""
    _require_kind(cfg, "twin")
    return _pmap(cfg.n_jobs, partial(run_replicate, cfg),
                 range(cfg.replicates))


def run_imperfect_experiment(cfg):
    """Imperfect-model experiments: two-scale nature, truncated forecast."""
    _require_kind(cfg, "imperfect")
    return _pmap(cfg.n_jobs, partial(run_replicate, cfg),
                 range(cfg.replicates))


def _state_only_rmse(cfg, theta, replicate, nature, observations, det):
    """Space-time mean analysis RMSE of one fixed-theta assimilation run.

    All streams are keyed by replicate only, so every grid point sees the
    same observations, initial members, and forcing noise (common random
    numbers).
    """
    model = cfg.covariance_model()
    pool = initial_condition_pool(cfg, seed_stream(cfg.master_seed, "pool",
                                                   replicate))
    member_rng = seed_stream(cfg.master_seed, "members", replicate)
    ens = make_inner_ensemble(draw_members(pool, cfg.n_members, member_rng),
                              theta, model, member_rng, phi=cfg.phi)
    rng = seed_stream(cfg.master_seed, "forecast", replicate)
    acc = 0.0
    count = 0
    for k, obs in enumerate(observations):
        ens = forecast_ensemble(ens, det, cfg.dt_truncated,
                                cfg.steps_per_cycle, rng)
        ens, _ = etkf_analysis(ens, obs, cfg.inflation)
        if k >= cfg.exhaustive_spinup:
            acc += state_rmse(ens.mean, nature.xs[k])
            count += 1
    return acc / count if count else float("nan")


def _point_with_provenance(cfg, points, rep, nature, observations, det, i):
    try:
        return _state_only_rmse(cfg, points[i], rep, nature, observations,
                                det)
    except Exception as err:
        raise type(err)(
            f"grid point {i} (theta={np.array2string(points[i])}), "
            f"replicate {rep}: {err}") from err


def exhaustive_search(cfg, grid=None):
    """State-only assimilation RMSE over a lattice of fixed parameters."""
    points = cfg.theta_grid() if grid is None else np.atleast_2d(
        np.asarray(grid, dtype=float))
    if len(points) == 0:
        raise ConfigError("exhaustive search needs a nonempty grid")
    model = cfg.covariance_model()
    if points.shape[1] != model.dim:
        raise ConfigError(f"grid points have {points.shape[1]} entries, "
                          f"model {cfg.cov_model!r} needs {model.dim}")
    t0 = time.perf_counter()
    rmse = np.empty((len(points), cfg.replicates))
    for rep in range(cfg.replicates):
        nature = nature_run(cfg, cfg.exhaustive_cycles,
                            seed_stream(cfg.master_seed, "nature", rep))
        observations = make_observations(nature, np.arange(cfg.n_vars),
                                         cfg.r_var, cfg.obs_interval,
                                         seed_stream(cfg.master_seed, "obs",
                                                     rep))
        det = _resolve_forcing(cfg, nature)
        job = partial(_point_with_provenance, cfg, points, rep, nature,
                      observations, det)
        rmse[:, rep] = _pmap(cfg.n_jobs, job, range(len(points)))
    return GridResult(parameter_names=tuple(model.names), points=points,
                      rmse=rmse, wall_clock=time.perf_counter() - t0)


def residual_covariance(traj, det, consts):
    """Covariance of (a0 + a1*x) minus the true effective forcing.

    Returns the (n, n) time-sample covariance of the residual vector and its
    ring-distance averages (index d = mean covariance at ring distance d).
    """
    if traj.ys is None:
        raise ConfigError("residuals need a two-scale trajectory with ys")
    if len(traj.xs) < 2:
        raise ConfigError("need at least 2 samples for a covariance")
    coupling = traj.ys.reshape(len(traj.ys), consts.n, consts.m).sum(axis=2)
    u_true = consts.f - (consts.h * consts.c / consts.b) * coupling
    resid = (det.a0 + det.a1 * traj.xs) - u_true
    cov = np.cov(resid.T)
    n = consts.n
    by_distance = np.array([
        np.mean([cov[i, (i + d) % n] for i in range(n)])
        for d in range(n // 2 + 1)])
    return cov, by_distance


def residual_covariance_diagnostic(duration, seed, cfg=None):
    """Fit (a0, a1) on a long two-scale run and characterize the residual."""
    if cfg is None:
        cfg = ExperimentConfig(kind="residual-diag")
    if duration <= 0:
        raise ConfigError("duration must be positive")
    t0 = time.perf_counter()
    consts = model_consts(cfg)
    traj = generate_nature_run("two_scale", duration=duration,
                               dt=cfg.dt_truncated,
                               spinup=cfg.residual_spinup,
                               record_every=cfg.obs_interval,
                               rng=seed_stream(seed, "nature", 0),
                               consts=consts)
    det = fit_deterministic_params(traj, consts)
    cov, by_distance = residual_covariance(traj, det, consts)
    return ResidualResult(det=det, cov=cov, by_distance=by_distance,
                          duration=float(duration), n_samples=len(traj.xs),
                          wall_clock=time.perf_counter() - t0)
