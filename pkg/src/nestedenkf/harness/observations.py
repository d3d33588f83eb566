"""Nature runs, synthetic observations, and initial-condition pools."""

from __future__ import annotations

import numpy as np

from ..dynamics import DetParams, L96Consts, generate_nature_run
from ..errors import AlignmentError, ConfigError
from ..etkf import Observation
from ..stochastic import build_covariance

#: Spinup (time units) of the auxiliary run that feeds the snapshot pool;
#: long enough to land on the attractor, short next to the nature spinup.
POOL_SPINUP = 50.0


def model_consts(cfg):
    """Two-scale constants described by a config."""
    return L96Consts(n=cfg.n_vars, m=cfg.n_fast, f=cfg.forcing,
                     h=cfg.coupling_h, b=cfg.coupling_b, c=cfg.coupling_c)


def _integrate(cfg, duration, record_every, spinup, rng):
    """Run the configured nature model (two-scale for imperfect, stochastic
    truncated otherwise) and record states every record_every time units."""
    if cfg.resolved_nature_model == "two_scale":
        return generate_nature_run("two_scale", duration=duration,
                                   dt=cfg.dt_two_scale, spinup=spinup,
                                   record_every=record_every, rng=rng,
                                   consts=model_consts(cfg))
    if cfg.nature_theta is None:
        raise ConfigError("twin experiments need nature_theta")
    model = cfg.covariance_model()
    cov = build_covariance(model, np.asarray(cfg.nature_theta))
    return generate_nature_run("truncated", duration=duration,
                               dt=cfg.dt_truncated, spinup=spinup,
                               record_every=record_every, rng=rng,
                               det=DetParams(cfg.a0, cfg.a1), noise_cov=cov,
                               phi=cfg.phi)


def nature_run(cfg, n_cycles, rng):
    """Nature trajectory with one recorded state per assimilation cycle."""
    return _integrate(cfg, duration=n_cycles * cfg.obs_interval,
                      record_every=cfg.obs_interval, spinup=cfg.nature_spinup,
                      rng=rng)


def make_observations(traj, obs_indices, r_var, interval, rng):
    """Perturb a trajectory into an Observation series.

    interval must be an integer multiple of the trajectory's recording
    stride; the series then holds one Observation per interval.
    """
    times = np.asarray(traj.times)
    if times.size == 0:
        return []
    stride = times[0] if times.size == 1 else times[1] - times[0]
    ratio = interval / stride
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise AlignmentError(
            f"observation interval {interval} is not a positive integer "
            f"multiple of the trajectory stride {stride}")
    ratio = round(ratio)
    obs_indices = np.asarray(obs_indices, dtype=np.intp)
    xs = traj.xs[ratio - 1::ratio]
    noise = (np.sqrt(r_var) * rng.standard_normal((len(xs), obs_indices.size))
             if r_var > 0 else np.zeros((len(xs), obs_indices.size)))
    return [Observation(y=row[obs_indices] + eps, obs_indices=obs_indices,
                        r_var=r_var)
            for row, eps in zip(xs, noise)]


def initial_condition_pool(cfg, rng):
    """Attractor snapshots spaced cfg.pool_spacing time units apart.

    Returns a (pool_snapshots, n_vars) array of temporally decorrelated
    states of the configured nature model, drawn from an auxiliary run.
    """
    traj = _integrate(cfg, duration=cfg.pool_snapshots * cfg.pool_spacing,
                      record_every=cfg.pool_spacing, spinup=POOL_SPINUP,
                      rng=rng)
    return traj.xs


def draw_members(pool, n_members, rng):
    """Sample initial ensemble members (rows) from a pool with replacement."""
    pool = np.asarray(pool)
    rows = rng.integers(0, pool.shape[0], size=n_members)
    return pool[rows].copy()
