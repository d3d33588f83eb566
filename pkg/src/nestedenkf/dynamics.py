"""Two-scale and truncated Lorenz-96 dynamics.

The truncated model replaces the small-scale coupling with an effective
forcing a0 + a1*x + e, where e is AR(1) red noise supplied by the caller;
(a0, a1) come from a least-squares fit of the effective forcing
f - (h c / b) * sum_block(y) diagnosed from a two-scale run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BlowupError, RankDeficiencyError
from .validation import as_float_array

# Draws of AR(1) innovations are chunked to bound memory on long runs.
_CHUNK_STEPS = 200_000


@dataclass(frozen=True)
class L96Consts:
    """Constants of the two-scale Lorenz-96 system."""

    n: int = 8
    m: int = 32
    f: float = 20.0
    h: float = 1.0
    b: float = 10.0
    c: float = 10.0

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("n must be at least 4 for the advection stencil")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.b == 0:
            raise ValueError("b must be nonzero")


@dataclass(frozen=True)
class DetParams:
    """Deterministic part of the effective forcing: a0 + a1 * x."""

    a0: float
    a1: float


#: OLS fit of the subgrid forcing for the standard constants (F=20, h=1,
#: b=c=10); reproduced to <0.5% by fit_deterministic_params on a long run.
DEFAULT_FORCING = DetParams(a0=19.169, a1=-0.813)


@dataclass
class FullState:
    """State of the two-scale system: large-scale x and small-scale y."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = as_float_array(self.x, "x", ndim=1)
        self.y = as_float_array(self.y, "y", ndim=1)
        if self.y.size % self.x.size:
            raise ValueError("y length must be a multiple of x length")


@dataclass
class Trajectory:
    """States recorded at a fixed stride; times measured from spinup end."""

    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray | None = None


def two_scale_tendency(x, y, consts):
    """Tendencies (dx/dt, dy/dt) of the two-scale system, cyclic in both rings."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = consts.n, consts.m
    if x.shape[-1] != n or y.shape[-1] != n * m:
        raise ValueError(f"expected x[..., {n}] and y[..., {n * m}]")
    hcb = consts.h * consts.c / consts.b
    coupling = y.reshape(y.shape[:-1] + (n, m)).sum(axis=-1)
    dx = (-np.roll(x, 1, axis=-1) * (np.roll(x, 2, axis=-1) - np.roll(x, -1, axis=-1))
          - x + consts.f - hcb * coupling)
    dy = (-consts.c * consts.b * np.roll(y, -1, axis=-1)
          * (np.roll(y, -2, axis=-1) - np.roll(y, 1, axis=-1))
          - consts.c * y + hcb * np.repeat(x, m, axis=-1))
    return dx, dy


def truncated_tendency(x, det, e=None):
    """Tendency of the truncated model with effective forcing a0 + a1*x + e."""
    x = np.asarray(x, dtype=float)
    forcing = det.a0 + det.a1 * x
    if e is not None:
        forcing = forcing + np.asarray(e, dtype=float)
    return (-np.roll(x, 1, axis=-1) * (np.roll(x, 2, axis=-1) - np.roll(x, -1, axis=-1))
            - x + forcing)


def rk4_step(state, dt, f):
    """One classical Runge-Kutta step of size dt for tendency function f."""
    k1 = f(state)
    k2 = f(state + (0.5 * dt) * k1)
    k3 = f(state + (0.5 * dt) * k2)
    k4 = f(state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def subgrid_forcing(state, consts):
    """Effective forcing f - (h c / b) * per-block small-scale sums."""
    n, m = consts.n, consts.m
    if state.x.size != n or state.y.size != n * m:
        raise ValueError("state does not match consts")
    return consts.f - (consts.h * consts.c / consts.b) * state.y.reshape(n, m).sum(axis=1)


def fit_from_forcing_samples(xs, fs):
    """Least-squares (a0, a1) from pooled (x, forcing) samples."""
    x = np.asarray(xs, dtype=float).ravel()
    f = np.asarray(fs, dtype=float).ravel()
    if x.size != f.size or x.size < 2:
        raise ValueError("need matching x and forcing samples")
    if np.var(x) <= 1e-12:
        raise RankDeficiencyError("state samples are (numerically) constant; "
                                  "cannot fit a slope")
    xm = x - x.mean()
    a1 = float(xm @ (f - f.mean()) / (xm @ xm))
    a0 = float(f.mean() - a1 * x.mean())
    return DetParams(a0=a0, a1=a1)


def fit_deterministic_params(states, consts):
    """Fit (a0, a1) to the effective forcing of a two-scale trajectory.

    Accepts a Trajectory with small-scale records or a sequence of FullState.
    """
    if isinstance(states, Trajectory):
        if states.ys is None:
            raise ValueError("trajectory has no small-scale records")
        xs = states.xs
        gsums = states.ys.reshape(len(states.ys), consts.n, consts.m).sum(axis=2)
    else:
        xs = np.array([s.x for s in states])
        gsums = np.array([s.y.reshape(consts.n, consts.m).sum(axis=1) for s in states])
    fs = consts.f - (consts.h * consts.c / consts.b) * gsums
    return fit_from_forcing_samples(xs, fs)


def _resolve_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _stride_steps(interval, dt, name):
    steps = interval / dt
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps) or round(steps) < 1:
        raise ValueError(f"{name}={interval} is not a positive multiple of dt={dt}")
    return round(steps)


def _run_truncated_chunks(x, e, det, chol, phi, dt, nsteps, rec_stride, xs_out, rng):
    """Drive the truncated kernel in chunks, drawing innovations as needed."""
    n = x.shape[1]
    done = 0
    rec = 0
    while done < nsteps:
        take = min(_CHUNK_STEPS, nsteps - done)
        if rec_stride > 0 and take % rec_stride:
            # keep chunk boundaries on record boundaries
            take = max(rec_stride, take - take % rec_stride)
        if chol is None:
            eta = np.zeros((0, x.shape[0], n))
        else:
            eta = rng.standard_normal((take, x.shape[0], n)) @ chol.T
        n_rec = take // rec_stride if rec_stride > 0 else 0
        out = xs_out[rec:rec + n_rec] if rec_stride > 0 else np.zeros((0, x.shape[0], n))
        status = _kernels.integrate_truncated(x, e, eta, phi, det.a0, det.a1,
                                              dt, take, rec_stride, out)
        if status:
            raise BlowupError(f"truncated model produced non-finite values "
                              f"within steps {done}..{done + take}")
        done += take
        rec += n_rec


def generate_nature_run(system, duration, dt, spinup, record_every, rng=None, *,
                        consts=None, det=None, noise_cov=None, phi=0.984,
                        initial=None):
    """Integrate a nature model and record states at a fixed stride.

    Parameters
    ----------
    system : {"two_scale", "truncated"}
        "truncated" runs deterministically unless noise_cov is given, in which
        case the effective forcing carries AR(1) red noise (coefficient phi,
        innovation covariance noise_cov, stationary initial draw).
    duration, spinup : float
        Time units integrated after / before recording starts.
    record_every : float
        Record stride in time units; must be a multiple of dt.
    rng : int, numpy Generator, or None
    consts : L96Consts, optional
    det : DetParams, required for the truncated system
    initial : optional initial state ((n,) array or FullState)
    """
    consts = consts or L96Consts()
    rng = _resolve_rng(rng)
    stride = _stride_steps(record_every, dt, "record_every")
    nsteps = round(duration / dt)
    spin_steps = round(spinup / dt)
    n_rec = nsteps // stride
    n, m = consts.n, consts.m
    times = record_every * np.arange(1, n_rec + 1)

    if system == "truncated":
        if det is None:
            raise ValueError("truncated system needs det params")
        if initial is None:
            x = np.full(n, consts.f)
            x[0] += 1e-3
        else:
            x = as_float_array(initial, "initial", ndim=1, shape=(n,)).copy()
        x = x[None, :]
        chol = None if noise_cov is None else np.asarray(noise_cov.chol)
        e = np.zeros((1, n))
        if chol is not None:
            e = rng.standard_normal((1, n)) @ chol.T  # stationary start
        if spin_steps:
            _run_truncated_chunks(x, e, det, chol, phi, dt, spin_steps, 0, None, rng)
        xs = np.empty((n_rec, 1, n))
        if nsteps:
            _run_truncated_chunks(x, e, det, chol, phi, dt, nsteps, stride, xs, rng)
        return Trajectory(times=times, xs=xs[:, 0, :], ys=None)

    if system == "two_scale":
        if initial is None:
            x = np.full(n, consts.f)
            x[0] += 1e-3
            y = np.zeros(n * m)
        elif isinstance(initial, FullState):
            x, y = initial.x.copy(), initial.y.copy()
        else:
            x, y = (np.asarray(initial[0], dtype=float).copy(),
                    np.asarray(initial[1], dtype=float).copy())
        args = (consts.n, consts.m, consts.f, consts.h, consts.b, consts.c, dt)
        if spin_steps:
            status = _kernels.integrate_two_scale(
                x, y, *args, spin_steps, 0, np.zeros((0, n)), np.zeros((0, n)),
                np.zeros((0, n * m)), False)
            if status:
                raise BlowupError("two-scale model produced non-finite values "
                                  "during spinup")
        xs = np.empty((n_rec, n))
        gs = np.empty((n_rec, n))
        ys = np.empty((n_rec, n * m))
        if nsteps:
            status = _kernels.integrate_two_scale(
                x, y, *args, nsteps, stride, xs, gs, ys, True)
            if status:
                raise BlowupError("two-scale model produced non-finite values")
        return Trajectory(times=times, xs=xs, ys=ys)

    raise ValueError(f"unknown system {system!r}")
