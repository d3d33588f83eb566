"""Tests for the scikit-learn facade."""

import numpy as np
import pytest
from sklearn.base import clone

from nestedenkf.errors import ConfigError
from nestedenkf.estimator import NestedEnKF, default_prior
from nestedenkf.dynamics import DEFAULT_FORCING, generate_nature_run
from nestedenkf.stochastic import COVARIANCE_MODELS, build_covariance


@pytest.fixture(scope="module")
def twin_data():
    """Short truncated-model nature run with sigma=2 forcing, fully observed."""
    rng = np.random.default_rng(42)
    model = COVARIANCE_MODELS["iso_diag"](8)
    cov = build_covariance(model, [2.0])
    traj = generate_nature_run("truncated", duration=2.0, dt=0.005, spinup=5.0,
                               record_every=0.05, rng=rng, noise_cov=cov,
                               det=DEFAULT_FORCING)
    truth = traj.xs
    y = truth + rng.standard_normal(truth.shape)
    return y, truth


class TestSklearnProtocol:
    def test_get_params_round_trip(self):
        est = NestedEnKF(n_members=7, inflation=1.2)
        params = est.get_params()
        assert params["n_members"] == 7
        assert params["inflation"] == 1.2
        assert params["cov_model"] == "iso_diag"
        rebuilt = NestedEnKF(**params)
        assert rebuilt.get_params() == params

    def test_set_params(self):
        est = NestedEnKF()
        est.set_params(cov_model="iso_exp", k_window=3)
        assert est.cov_model == "iso_exp"
        assert est.k_window == 3

    def test_clone_preserves_params_and_drops_state(self, twin_data):
        y, truth = twin_data
        est = NestedEnKF(n_members=6, n_ensembles=4, random_state=0)
        est.fit(y, truth=truth)
        copy = clone(est)
        assert copy.get_params() == est.get_params()
        assert not hasattr(copy, "theta_")

    def test_is_fitted_protocol(self, twin_data):
        y, _ = twin_data
        est = NestedEnKF(n_members=6, n_ensembles=4, random_state=0)
        assert not est.__sklearn_is_fitted__()
        est.fit(y)
        assert est.__sklearn_is_fitted__()


class TestFit:
    def test_attribute_shapes(self, twin_data):
        y, truth = twin_data
        est = NestedEnKF(n_members=6, n_ensembles=4, random_state=1)
        out = est.fit(y, truth=truth)
        assert out is est
        n_outer = y.shape[0] // est.k_window
        assert est.theta_history_.shape == (n_outer, 1)
        assert est.spread_history_.shape == (n_outer, 1)
        assert est.rmse_history_.shape == (n_outer * est.k_window,)
        assert est.theta_.shape == (1,)
        assert est.parameter_names_ == ("sigma",)
        assert est.n_features_in_ == 8
        assert np.all(np.isfinite(est.theta_history_))
        assert np.all(est.spread_history_ > 0)

    def test_rmse_absent_without_truth(self, twin_data):
        y, _ = twin_data
        est = NestedEnKF(n_members=6, n_ensembles=4, random_state=1).fit(y)
        assert est.rmse_history_ is None

    def test_trailing_cycles_ignored(self, twin_data):
        y, _ = twin_data
        est = NestedEnKF(n_members=6, n_ensembles=4, random_state=3)
        full = clone(est).fit(y[:20])
        ragged = clone(est).fit(y[:23])
        np.testing.assert_array_equal(full.theta_history_,
                                      ragged.theta_history_)

    def test_deterministic_given_random_state(self, twin_data):
        y, truth = twin_data
        kw = dict(n_members=6, n_ensembles=4, random_state=7)
        a = NestedEnKF(**kw).fit(y, truth=truth)
        b = NestedEnKF(**kw).fit(y, truth=truth)
        np.testing.assert_array_equal(a.theta_history_, b.theta_history_)
        np.testing.assert_array_equal(a.rmse_history_, b.rmse_history_)
        c = NestedEnKF(n_members=6, n_ensembles=4, random_state=8).fit(y)
        assert not np.array_equal(a.theta_, c.theta_)

    def test_moves_sigma_toward_truth(self, twin_data):
        y, truth = twin_data
        est = NestedEnKF(n_members=12, n_ensembles=8, random_state=5)
        est.fit(y, truth=truth)
        # Nature forcing sigma=2, prior mean 1.5: the estimate must move up.
        assert est.theta_[0] > 1.6
        assert np.all(est.rmse_history_[-10:] < 1.0)

    def test_explicit_prior_and_pool(self, twin_data):
        y, truth = twin_data
        est = NestedEnKF(n_members=6, n_ensembles=4, random_state=2,
                         prior_mean=[2.5], prior_std=[0.1])
        est.fit(y, initial_pool=truth)
        assert 2.0 < est.theta_history_[0, 0] < 3.0

    def test_partial_observation_requires_pool(self, twin_data):
        y, truth = twin_data
        est = NestedEnKF(n_members=6, n_ensembles=4, random_state=2)
        with pytest.raises(ConfigError, match="initial_pool"):
            est.fit(y[:, :4], obs_indices=np.arange(4))
        est.fit(y[:, :4], obs_indices=np.arange(4), initial_pool=truth)
        assert est.n_features_in_ == 4


class TestFitValidation:
    def test_unknown_model_rejected_at_fit(self, twin_data):
        y, _ = twin_data
        with pytest.raises(ConfigError, match="unknown covariance model"):
            NestedEnKF(cov_model="bogus").fit(y)

    def test_too_few_rows(self, twin_data):
        y, _ = twin_data
        with pytest.raises(ConfigError, match="k_window"):
            NestedEnKF(n_members=6, n_ensembles=4).fit(y[:3])

    def test_obs_index_width_mismatch(self, twin_data):
        y, _ = twin_data
        with pytest.raises(ConfigError, match="columns"):
            NestedEnKF(n_members=6, n_ensembles=4).fit(
                y, obs_indices=np.arange(5))

    def test_prior_length_mismatch(self, twin_data):
        y, _ = twin_data
        est = NestedEnKF(n_members=6, n_ensembles=4,
                         prior_mean=[1.0, 1.0], prior_std=[0.5, 0.5])
        with pytest.raises(ConfigError, match="needs 1 entries"):
            est.fit(y)

    def test_prior_given_partially(self, twin_data):
        y, _ = twin_data
        with pytest.raises(ConfigError, match="together"):
            NestedEnKF(prior_mean=[1.5]).fit(y)

    def test_nonpositive_prior_std(self, twin_data):
        y, _ = twin_data
        est = NestedEnKF(prior_mean=[1.5], prior_std=[0.0])
        with pytest.raises(ConfigError, match="positive"):
            est.fit(y)


class TestDefaultPriors:
    @pytest.mark.parametrize("tag", sorted(COVARIANCE_MODELS))
    def test_defaults_cover_every_model(self, tag):
        model = COVARIANCE_MODELS[tag](8)
        mean, std = default_prior(model)
        assert mean.shape == (model.dim,)
        assert std.shape == (model.dim,)
        assert np.all(std > 0)

    def test_known_values(self):
        mean, std = default_prior(COVARIANCE_MODELS["iso_exp"](8))
        np.testing.assert_allclose(mean, [1.5, 0.5])
        np.testing.assert_allclose(std, [0.5, 0.15])
        mean, std = default_prior(COVARIANCE_MODELS["aniso_diag"](8))
        np.testing.assert_allclose(mean, np.full(8, 2.0))
        np.testing.assert_allclose(std, np.full(8, 0.5))
