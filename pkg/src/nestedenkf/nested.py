"""Outer-cycle parameter estimation over windows of inner cycles.

Each outer cycle runs K forecast/analysis inner cycles for every one of the
N_J inner ensembles with its stochastic-parameter vector theta held fixed,
then updates the theta ensemble with one asynchronous ETKF step: the K mean
predicted observations of ensemble j are concatenated into its predicted
observation of the window, and the extended observation-error covariance is
block diagonal with k-th block (H P̄_k Hᵀ + R), where P̄_k averages the
forecast observation-space covariances across ensembles.
"""

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import DetParams
from .errors import SingularTransformError
from .etkf import InnerEnsemble, etkf_analysis, forecast_ensemble, with_theta
from .validation import as_float_array


@dataclass(frozen=True)
class WindowConfig:
    """Fixed per-experiment settings used by every inner cycle."""

    det: DetParams
    dt: float
    steps_per_cycle: int
    inflation: float = 1.0
    diag_shortcut: bool = False

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if int(self.steps_per_cycle) < 1:
            raise ValueError("steps_per_cycle must be >= 1")
        if self.inflation <= 0.0:
            raise ValueError("inflation must be positive")


@dataclass(frozen=True)
class OuterBank:
    """The N_J inner ensembles of the outer cycle plus window bookkeeping."""

    ensembles: tuple
    k_window: int
    outer_index: int = 0

    def __post_init__(self):
        if len(self.ensembles) < 1:
            raise ValueError("the bank needs at least one inner ensemble")
        if self.k_window < 1:
            raise ValueError("k_window must be >= 1")
        n = self.ensembles[0].n
        if any(e.n != n for e in self.ensembles):
            raise ValueError("all inner ensembles must share the state size")
        object.__setattr__(self, "ensembles", tuple(self.ensembles))

    @property
    def n_ensembles(self):
        return len(self.ensembles)

    @property
    def thetas(self):
        """(N_J, p) matrix of the per-ensemble parameter vectors."""
        return np.array([e.theta for e in self.ensembles])


def make_outer_bank(ensembles, k_window):
    return OuterBank(ensembles=tuple(ensembles), k_window=int(k_window))


@dataclass(frozen=True)
class WindowRecord:
    """Observation-space bookkeeping of one window.

    pred_obs[k, j] is ensemble j's mean predicted observation at inner cycle
    k (recorded pre-analysis); mean_obs_cov[k] is the across-ensemble average
    of the forecast observation-space covariances; analysis_means[k] is the
    across-ensemble grand mean of the analysis states and analysis_spread[k]
    the across-ensemble average of the member standard deviation (averaged
    over components), both kept for diagnostics.
    """

    pred_obs: np.ndarray
    mean_obs_cov: np.ndarray
    observations: tuple
    analysis_means: np.ndarray
    analysis_spread: np.ndarray


@dataclass(frozen=True)
class NestedDiagnostics:
    """Per-outer-cycle theta statistics and per-inner-cycle analysis RMSE."""

    theta_mean: np.ndarray
    theta_spread: np.ndarray
    rmse: np.ndarray
    state_spread: np.ndarray


def run_window(bank, obs_window, cfg, rngs):
    """Run the K inner cycles of one window for every ensemble independently.

    rngs must hold one generator per ensemble; each ensemble consumes only
    its own stream, so results are bit-identical however the j-loop is
    scheduled.
    """
    k_window = bank.k_window
    if len(obs_window) != k_window:
        raise ValueError(f"expected {k_window} observations, got {len(obs_window)}")
    if len(rngs) != bank.n_ensembles:
        raise ValueError("need exactly one rng stream per inner ensemble")
    n_obs = {o.n_obs for o in obs_window}
    if len(n_obs) != 1:
        raise ValueError("all observations in a window must have equal size")
    q = n_obs.pop()

    n_j = bank.n_ensembles
    n = bank.ensembles[0].n
    pred_obs = np.empty((k_window, n_j, q))
    cov_sum = np.zeros((k_window, q, q))
    mean_sum = np.zeros((k_window, n))
    spread_sum = np.zeros(k_window)
    new_ensembles = []
    for j, (ens, rng) in enumerate(zip(bank.ensembles, rngs)):
        for k, obs in enumerate(obs_window):
            try:
                ens = forecast_ensemble(ens, cfg.det, cfg.dt,
                                        cfg.steps_per_cycle, rng)
                ens, stats = etkf_analysis(ens, obs, cfg.inflation)
            except Exception as err:
                raise type(err)(
                    f"outer cycle {bank.outer_index}, ensemble {j}, "
                    f"inner cycle {k}: {err}") from err
            pred_obs[k, j] = stats.mean_pred_obs
            cov_sum[k] += stats.forecast_obs_cov
            mean_sum[k] += ens.mean
            spread_sum[k] += ens.members.std(axis=0, ddof=1).mean()
        new_ensembles.append(ens)

    record = WindowRecord(pred_obs=pred_obs, mean_obs_cov=cov_sum / n_j,
                          observations=tuple(obs_window),
                          analysis_means=mean_sum / n_j,
                          analysis_spread=spread_sum / n_j)
    return replace(bank, ensembles=tuple(new_ensembles)), record


def aggregate(record, diag_shortcut=False):
    """Stack a window into asynchronous-ETKF form.

    Returns the aggregated observation y* (concatenation of the K
    observation vectors), the per-ensemble aggregated predicted observations
    (N_J, K·q), and the block-diagonal extended error covariance R* whose
    k-th block is H P̄_k Hᵀ + R — reduced to its diagonal when the shortcut
    is active.
    """
    k_window, n_j, q = record.pred_obs.shape
    y_star = np.concatenate([o.y for o in record.observations])
    pred_star = record.pred_obs.transpose(1, 0, 2).reshape(n_j, k_window * q)
    r_star = np.zeros((k_window * q, k_window * q))
    for k, obs in enumerate(record.observations):
        block = record.mean_obs_cov[k] + np.diag(obs.r_var)
        if diag_shortcut:
            block = np.diag(np.diag(block))
        sl = slice(k * q, (k + 1) * q)
        r_star[sl, sl] = block
    return y_star, pred_star, r_star


def parameter_update(thetas, pred_star, y_star, r_star):
    """One symmetric square-root ETKF step in parameter space.

    thetas (N_J, p) is the parameter ensemble, pred_star (N_J, m) its
    predicted aggregated observations, y_star (m,) the aggregated
    observation, and r_star (m, m) the extended error covariance. The member
    spread of pred_star supplies the H Pxx Hᵀ part of the innovation
    covariance implicitly; r_star carries H P̄ Hᵀ + R.
    """
    thetas = as_float_array(thetas, "thetas", ndim=2)
    pred_star = as_float_array(pred_star, "pred_star", ndim=2)
    n_j = thetas.shape[0]
    if n_j < 2:
        raise ValueError("the parameter update needs at least 2 members")
    if pred_star.shape[0] != n_j:
        raise ValueError("thetas and pred_star disagree on the member count")
    m = pred_star.shape[1]
    y_star = as_float_array(y_star, "y_star", ndim=1, shape=(m,))
    r_star = as_float_array(r_star, "r_star", ndim=2, shape=(m, m))

    t_bar = thetas.mean(axis=0)
    a_t = thetas - t_bar
    p_bar = pred_star.mean(axis=0)
    y_p = pred_star - p_bar
    try:
        chol = np.linalg.cholesky(r_star)
    except np.linalg.LinAlgError as err:
        raise SingularTransformError(
            f"extended observation covariance is not positive definite: {err}"
        ) from err
    l_inv = np.linalg.solve(chol, np.eye(m))
    z = y_p @ l_inv.T
    if not np.all(np.isfinite(z)):
        raise SingularTransformError("non-finite aggregated predictions")
    u, s, vt = np.linalg.svd(z, full_matrices=False)
    delta = l_inv @ (y_star - p_bar)
    w_bar = u @ ((s / (n_j - 1.0 + s ** 2)) * (vt @ delta))
    shrink = np.sqrt((n_j - 1.0) / (n_j - 1.0 + s ** 2)) - 1.0
    a_analysis = a_t + u @ (shrink[:, None] * (u.T @ a_t))
    return (t_bar + w_bar @ a_t) + a_analysis


def apply_thetas(bank, thetas):
    """Assign updated parameter vectors back to their ensembles (identity
    mapping j -> j), reprojecting each and rebuilding its covariance."""
    thetas = as_float_array(thetas, "thetas", ndim=2)
    if thetas.shape[0] != bank.n_ensembles:
        raise ValueError("theta count does not match the bank")
    ensembles = tuple(with_theta(ens, theta)
                      for ens, theta in zip(bank.ensembles, thetas))
    return replace(bank, ensembles=ensembles)


def nested_assimilation(bank, observations, cfg, rngs, truth=None):
    """Alternate run_window / aggregate / parameter_update over all windows.

    observations is a flat time-ordered list whose length must be a multiple
    of the bank's window length K; truth, when given, is the matching
    (n_cycles, n) array of true states used for analysis-RMSE diagnostics.
    Returns the final bank and per-cycle diagnostics. Deterministic given
    the rng streams.
    """
    k_window = bank.k_window
    n_outer, leftover = divmod(len(observations), k_window)
    if leftover:
        raise ValueError(f"{len(observations)} observations do not fill "
                         f"{k_window}-cycle windows")
    if n_outer and bank.n_ensembles < 2:
        raise ValueError("parameter estimation needs at least 2 inner ensembles")
    if truth is not None:
        truth = as_float_array(truth, "truth", ndim=2)
        if truth.shape[0] < len(observations):
            raise ValueError("truth has fewer rows than there are cycles")

    p = bank.thetas.shape[1]
    theta_mean = np.empty((n_outer, p))
    theta_spread = np.empty((n_outer, p))
    state_spread = np.empty(n_outer * k_window)
    rmse = np.empty(n_outer * k_window) if truth is not None else None
    for l in range(n_outer):
        window = observations[l * k_window:(l + 1) * k_window]
        bank, record = run_window(bank, window, cfg, rngs)
        y_star, pred_star, r_star = aggregate(record, cfg.diag_shortcut)
        thetas = parameter_update(bank.thetas, pred_star, y_star, r_star)
        bank = replace(apply_thetas(bank, thetas), outer_index=bank.outer_index + 1)
        theta_mean[l] = bank.thetas.mean(axis=0)
        theta_spread[l] = bank.thetas.std(axis=0, ddof=1)
        state_spread[l * k_window:(l + 1) * k_window] = record.analysis_spread
        if truth is not None:
            for k in range(k_window):
                rmse[l * k_window + k] = float(np.sqrt(np.mean(
                    (record.analysis_means[k] - truth[l * k_window + k]) ** 2)))

    return bank, NestedDiagnostics(theta_mean=theta_mean,
                                   theta_spread=theta_spread, rmse=rmse,
                                   state_spread=state_spread)
