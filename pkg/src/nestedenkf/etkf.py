"""Inner-cycle state estimation: ensemble forecast and ETKF analysis.

The analysis is a deterministic symmetric square-root ensemble transform
filter. Members are stored row-wise (shape ``(n_members, n)``). The
transform is computed from the thin SVD of the scaled predicted-observation
deviations, which costs O(n_members * n_obs^2) and is exactly equivalent to
the textbook eigendecomposition of the (n_members x n_members) weight
matrix.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import BlowupError, SingularTransformError
from .stochastic import CovarianceMatrix, CovarianceModelBase, build_covariance, sample_gaussian
from .validation import as_float_array, check_index_array, ensure_finite

DEFAULT_PHI = 0.984


@dataclass(frozen=True)
class Observation:
    """One observation vector: values, observed components, error variance.

    r_var may be a scalar or one variance per component; it is stored
    broadcast to shape ``(n_obs,)``.  Zero variances mark perfect
    observations: valid as data, but etkf_analysis rejects them because the
    update inverts R.
    """

    y: np.ndarray
    obs_indices: np.ndarray
    r_var: np.ndarray

    def __post_init__(self):
        y = as_float_array(self.y, "y", ndim=1)
        ensure_finite(y, "y")
        idx = np.asarray(self.obs_indices)
        if idx.ndim != 1 or (idx.size and not np.issubdtype(idx.dtype, np.integer)):
            raise ValueError("obs_indices must be a 1-D integer array")
        idx = idx.astype(np.int64, copy=True)
        if idx.size != np.unique(idx).size:
            raise ValueError("obs_indices must be unique")
        if y.size != idx.size:
            raise ValueError(f"y has {y.size} values but obs_indices has {idx.size}")
        r = np.broadcast_to(np.asarray(self.r_var, dtype=float), (idx.size,)).copy()
        if idx.size and not np.all(r >= 0.0):
            raise ValueError("r_var must be nonnegative")
        object.__setattr__(self, "y", y.copy())
        object.__setattr__(self, "obs_indices", idx)
        object.__setattr__(self, "r_var", r)

    @property
    def n_obs(self):
        return self.y.size


@dataclass(frozen=True)
class ObsSpaceStats:
    """Forecast statistics in observation space, recorded pre-analysis.

    mean_pred_obs is H(x̄ᶠ); forecast_obs_cov is the symmetrized sample
    covariance of the predicted observations, H Pᶠ Hᵀ.
    """

    mean_pred_obs: np.ndarray
    forecast_obs_cov: np.ndarray


@dataclass(frozen=True)
class InnerEnsemble:
    """One state ensemble bound to a stochastic-parameter vector theta.

    members and noise have shape ``(n_members, n)``; noise carries the
    per-member AR(1) red-noise states; cov is the covariance built from
    theta under the given model and is rebuilt whenever theta changes.
    """

    members: np.ndarray
    noise: np.ndarray
    phi: float
    theta: np.ndarray
    model: CovarianceModelBase
    cov: CovarianceMatrix

    def __post_init__(self):
        members = as_float_array(self.members, "members", ndim=2)
        if members.shape[0] < 2:
            raise ValueError("an ensemble needs at least 2 members")
        noise = as_float_array(self.noise, "noise", ndim=2, shape=members.shape)
        if self.cov.n != members.shape[1]:
            raise ValueError("covariance dimension does not match the state")
        if not 0.0 <= self.phi < 1.0:
            raise ValueError(f"phi must lie in [0, 1), got {self.phi}")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "noise", noise)

    @property
    def n_members(self):
        return self.members.shape[0]

    @property
    def n(self):
        return self.members.shape[1]

    @property
    def mean(self):
        return self.members.mean(axis=0)


def make_inner_ensemble(members, theta, model, rng, phi=DEFAULT_PHI, noise=None):
    """Build an InnerEnsemble: project theta, build its covariance, and
    draw stationary AR(1) noise states unless an explicit noise array is
    given."""
    members = as_float_array(members, "members", ndim=2)
    theta = model.project(np.asarray(theta, dtype=float))
    cov = build_covariance(model, theta)
    if noise is None:
        noise = sample_gaussian(cov, rng, size=members.shape[0])
    return InnerEnsemble(members=members, noise=np.asarray(noise, dtype=float),
                         phi=phi, theta=theta, model=model, cov=cov)


def with_theta(ens, theta):
    """Return the ensemble re-bound to a new theta (projected), with its
    covariance rebuilt and members/noise carried over unchanged."""
    theta = ens.model.project(np.asarray(theta, dtype=float))
    cov = build_covariance(ens.model, theta)
    return replace(ens, theta=theta, cov=cov)


def forecast_ensemble(ens, det, dt, steps, rng):
    """Advance every member `steps` RK4 steps of the truncated model.

    Before each step the member's AR(1) noise state advances by one
    innovation drawn from the ensemble's covariance; all members share the
    given stream but receive independent draws.
    """
    steps = int(steps)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    x = ens.members.copy()
    e = ens.noise.copy()
    eta = rng.standard_normal((steps,) + x.shape) @ ens.cov.chol.T
    status = _kernels.integrate_truncated(
        x, e, eta, ens.phi, det.a0, det.a1, dt, steps, 0,
        np.zeros((0,) + x.shape))
    if status:
        bad = np.where(~np.isfinite(x).all(axis=1) | ~np.isfinite(e).all(axis=1))[0]
        which = f"member {bad[0]}" if bad.size else "a member"
        raise BlowupError(f"{which} became non-finite during a {steps}-step forecast")
    return replace(ens, members=x, noise=e)


def etkf_analysis(ens, obs, inflation=1.0):
    """Symmetric square-root ETKF analysis of one ensemble.

    Multiplicative inflation (default 1.0 = off) scales the forecast
    perturbations before the update. Returns the analysis ensemble and the
    observation-space forecast statistics of the (inflated) forecast
    ensemble, which the outer parameter cycle aggregates.
    """
    if inflation <= 0.0:
        raise ValueError("inflation must be positive")
    idx = check_index_array(obs.obs_indices, ens.n, "obs_indices")
    x = ens.members
    n_i = x.shape[0]
    xbar = x.mean(axis=0)
    a = x - xbar
    if inflation != 1.0:
        a = a * inflation
        x = xbar + a

    hx = x[:, idx]
    hbar = hx.mean(axis=0)
    yd = hx - hbar
    cov_hh = yd.T @ yd / (n_i - 1)
    stats = ObsSpaceStats(mean_pred_obs=hbar,
                          forecast_obs_cov=0.5 * (cov_hh + cov_hh.T))
    if idx.size == 0:
        return replace(ens, members=ens.members.copy()), stats

    if not np.all(obs.r_var > 0.0):
        raise ValueError("etkf_analysis requires positive r_var")
    sqrt_r = np.sqrt(obs.r_var)
    z = yd / sqrt_r
    if not np.all(np.isfinite(z)):
        raise SingularTransformError("non-finite predicted-observation deviations")
    try:
        u, s, vt = np.linalg.svd(z, full_matrices=False)
    except np.linalg.LinAlgError as err:
        raise SingularTransformError(f"transform SVD failed: {err}") from err
    if not np.all(np.isfinite(s)):
        raise SingularTransformError("transform spectrum is non-finite")

    # Weight matrix M = (N-1) I + Z Zᵀ has eigenvalues (N-1) + s²;
    # mean weights use M⁻¹, perturbations its symmetric inverse root.
    delta = (obs.y - hbar) / sqrt_r
    if not np.all(np.isfinite(delta)):
        raise SingularTransformError("non-finite innovation")
    wbar = u @ ((s / (n_i - 1.0 + s ** 2)) * (vt @ delta))
    shrink = np.sqrt((n_i - 1.0) / (n_i - 1.0 + s ** 2)) - 1.0
    a_analysis = a + u @ (shrink[:, None] * (u.T @ a))
    members = (xbar + wbar @ a) + a_analysis
    return replace(ens, members=members), stats


def state_rmse(analysis_mean, truth):
    """Root-mean-square difference between two equally long state vectors."""
    a = as_float_array(analysis_mean, "analysis_mean", ndim=1)
    b = as_float_array(truth, "truth", ndim=1, shape=a.shape)
    return float(np.sqrt(np.mean((a - b) ** 2)))
