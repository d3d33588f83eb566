"""Tests for covariance models, PSD projection, and AR(1) red noise."""

import math

import numpy as np
import pytest
from scipy import stats

from nestedenkf.stochastic import (
    EPS,
    AnisotropicDiagonal,
    Ar1Noise,
    IsotropicDiagonal,
    IsotropicExponential,
    SymmetricCirculant,
    ar1_step,
    build_covariance,
    project_psd,
    ring_distance,
    sample_gaussian,
    stationary_noise,
)


def circulant_from_row(row):
    n = len(row)
    return np.array([[row[(j - i) % n] for j in range(n)] for i in range(n)])


class TestRingDistance:
    def test_values(self):
        assert ring_distance(0, 0, 8) == 0
        assert ring_distance(0, 4, 8) == 4
        assert ring_distance(1, 7, 8) == 2
        assert ring_distance(7, 1, 8) == 2

    def test_symmetry_and_bound(self):
        n = 8
        for i in range(n):
            for j in range(n):
                assert ring_distance(i, j, n) == ring_distance(j, i, n)
                assert 0 <= ring_distance(i, j, n) <= n // 2


class TestBuildSigma:
    def test_isotropic_diagonal(self):
        cov = build_covariance(IsotropicDiagonal(8), [2.0])
        np.testing.assert_array_equal(cov.sigma, 4.0 * np.eye(8))

    def test_isotropic_diagonal_clamps_negative(self):
        cov = build_covariance(IsotropicDiagonal(8), [-0.5])
        np.testing.assert_allclose(cov.sigma, 1e-16 * np.eye(8), rtol=1e-12)

    def test_isotropic_exponential_values(self):
        cov = build_covariance(IsotropicExponential(8), [2.0, 0.3])
        sig = cov.sigma
        np.testing.assert_allclose(np.diag(sig), np.full(8, 4.0), rtol=0, atol=1e-14)
        # distance-4 pairs: 4 * exp(-1.2) ~ 0.3 * sigma^2
        np.testing.assert_allclose(sig[0, 4], 4.0 * math.exp(-1.2), rtol=1e-14)
        np.testing.assert_allclose(sig[2, 6], 4.0 * math.exp(-1.2), rtol=1e-14)
        np.testing.assert_allclose(sig[0, 1], 4.0 * math.exp(-0.3), rtol=1e-14)
        np.testing.assert_allclose(sig[0, 7], 4.0 * math.exp(-0.3), rtol=1e-14)
        # full structure against an explicit loop
        expected = np.array([[4.0 * math.exp(-0.3 * ring_distance(i, j, 8))
                              for j in range(8)] for i in range(8)])
        np.testing.assert_allclose(sig, expected, rtol=1e-14)

    def test_isotropic_exponential_psd_over_rho_range(self):
        for rho in [0.0, 0.05, 0.3, 1.2, 5.0, 25.0]:
            sig = IsotropicExponential(8).build(np.array([2.0, rho]))
            assert np.linalg.eigvalsh(sig).min() > -1e-10

    def test_symmetric_circulant_structure(self):
        theta = np.array([2.0, 0.5, -0.3, 0.2, 0.1])
        cov = build_covariance(SymmetricCirculant(8), theta)
        row = np.array([2.0, 0.5, -0.3, 0.2, 0.1, 0.2, -0.3, 0.5])
        np.testing.assert_allclose(cov.sigma, circulant_from_row(row),
                                   rtol=0, atol=1e-12)

    def test_symmetric_circulant_identity(self):
        cov = build_covariance(SymmetricCirculant(8), [1.0, 0, 0, 0, 0])
        np.testing.assert_allclose(cov.sigma, np.eye(8), rtol=0, atol=1e-12)

    def test_anisotropic_diagonal(self):
        amps = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])
        cov = build_covariance(AnisotropicDiagonal(8), amps)
        np.testing.assert_allclose(cov.sigma, np.diag(amps ** 2), rtol=0, atol=0)

    def test_cholesky_factor(self):
        rng = np.random.default_rng(0)
        for model, dim in [(IsotropicDiagonal(8), 1), (IsotropicExponential(8), 2),
                           (SymmetricCirculant(8), 5), (AnisotropicDiagonal(8), 8)]:
            theta = np.abs(rng.normal(1.0, 0.5, dim)) + 0.2
            cov = build_covariance(model, theta)
            np.testing.assert_allclose(cov.chol, np.tril(cov.chol), rtol=0, atol=0)
            np.testing.assert_allclose(cov.chol @ cov.chol.T, cov.sigma,
                                       rtol=0, atol=1e-10)

    def test_symmetry_always(self):
        rng = np.random.default_rng(1)
        for model in [IsotropicDiagonal(8), IsotropicExponential(8),
                      SymmetricCirculant(8), AnisotropicDiagonal(8)]:
            for _ in range(25):
                theta = rng.normal(0.5, 1.0, model.dim)
                cov = build_covariance(model, theta)
                np.testing.assert_allclose(cov.sigma, cov.sigma.T, rtol=0, atol=0)
                assert np.linalg.eigvalsh(cov.sigma).min() > -1e-10


class TestProjectPsd:
    def test_psd_input_unchanged(self):
        sig = IsotropicExponential(8).build(np.array([2.0, 0.3]))
        out = project_psd(sig, IsotropicExponential(8))
        np.testing.assert_allclose(out, sig, rtol=0, atol=1e-12)

    def test_spec_circulant_example(self):
        # first row (1, .9, .9, .9, .9, .9, .9, .9): eigenvalues {7.3, 0.1}
        sig = SymmetricCirculant(8).build(np.array([1.0, 0.9, 0.9, 0.9, 0.9]))
        out = project_psd(sig, SymmetricCirculant(8))
        assert np.linalg.eigvalsh(out).min() >= 1e-8 - 1e-12
        np.testing.assert_allclose(out, sig, rtol=0, atol=1e-12)

    def test_indefinite_circulant_matches_eigenclip_oracle(self):
        theta = np.array([0.5, 0.9, 0.1, 0.0, 0.0])
        sig = SymmetricCirculant(8).build(theta)
        w = np.linalg.eigvalsh(sig)
        assert w.min() < -1.0  # genuinely indefinite input
        out = project_psd(sig, SymmetricCirculant(8))
        w2, v2 = np.linalg.eigh(sig)
        oracle = (v2 * np.maximum(w2, EPS)) @ v2.T
        np.testing.assert_allclose(out, oracle, rtol=0, atol=1e-10)
        assert np.linalg.eigvalsh(out).min() >= EPS - 1e-12

    def test_idempotent(self):
        theta = np.array([0.5, 0.9, 0.1, 0.0, 0.0])
        model = SymmetricCirculant(8)
        once = project_psd(model.build(theta), model)
        twice = project_psd(once, model)
        np.testing.assert_allclose(twice, once, rtol=0, atol=1e-12)

    def test_diagonal_model_floor(self):
        model = AnisotropicDiagonal(4)
        sig = np.diag([4.0, -1.0, 0.0, 2.0])
        out = project_psd(sig, model)
        np.testing.assert_allclose(np.diag(out), [4.0, EPS ** 2, EPS ** 2, 2.0])

    def test_parameter_projection(self):
        assert IsotropicDiagonal(8).project(np.array([-0.5]))[0] == EPS
        np.testing.assert_allclose(
            IsotropicExponential(8).project(np.array([-1.0, -0.2])), [EPS, 0.0])
        proj = SymmetricCirculant(8).project(np.array([0.5, 0.9, 0.1, 0.0, 0.0]))
        sig = SymmetricCirculant(8).build(proj)
        assert np.linalg.eigvalsh(sig).min() >= EPS - 1e-12


class TestSampleGaussian:
    def test_zero_covariance_gives_zero(self):
        cov = build_covariance(IsotropicDiagonal(8), [0.0])
        # sigma is eps^2*I after projection; draws are O(eps), i.e. ~0
        draw = sample_gaussian(cov, np.random.default_rng(0))
        assert np.max(np.abs(draw)) < 1e-6

    def test_identity_moments(self):
        cov = build_covariance(IsotropicDiagonal(8), [1.0])
        draws = sample_gaussian(cov, np.random.default_rng(2), size=1_000_000)
        assert draws.shape == (1_000_000, 8)
        assert np.max(np.abs(draws.mean(axis=0))) < 0.005
        np.testing.assert_allclose(draws.var(axis=0), 1.0, rtol=0.02)

    def test_scaled_variance(self):
        cov = build_covariance(IsotropicDiagonal(8), [2.0])
        draws = sample_gaussian(cov, np.random.default_rng(3), size=1_000_000)
        np.testing.assert_allclose(draws.var(axis=0), 4.0, rtol=0.02)

    def test_cross_covariance_structure(self):
        cov = build_covariance(IsotropicExponential(8), [2.0, 0.3])
        draws = sample_gaussian(cov, np.random.default_rng(4), size=200_000)
        sample_cov = np.cov(draws.T)
        np.testing.assert_allclose(sample_cov, cov.sigma, rtol=0, atol=0.06)


class TestAr1Step:
    def test_phi_zero_is_fresh_draw(self):
        cov = build_covariance(IsotropicExponential(8), [2.0, 0.3])
        noise = Ar1Noise(e=np.full(8, 100.0), phi=0.0)
        stepped = ar1_step(noise, cov, np.random.default_rng(5))
        expected = np.random.default_rng(5).standard_normal(8) @ cov.chol.T
        np.testing.assert_allclose(stepped.e, expected, rtol=0, atol=1e-12)

    def test_one_step_algebra(self):
        cov = build_covariance(IsotropicDiagonal(8), [2.0])
        e0 = np.arange(8.0)
        noise = Ar1Noise(e=e0.copy(), phi=0.984)
        stepped = ar1_step(noise, cov, np.random.default_rng(6))
        z = np.random.default_rng(6).standard_normal(8)
        expected = 0.984 * e0 + math.sqrt(1 - 0.984 ** 2) * (z @ cov.chol.T)
        np.testing.assert_allclose(stepped.e, expected, rtol=0, atol=1e-12)

    def test_stationary_moments(self):
        # 10 independent chains x 1e5 steps: pooled per-component variance and
        # lag-1 autocorrelation of a sigma=2, phi=0.984 process.
        cov = build_covariance(IsotropicDiagonal(8), [2.0])
        rng = np.random.default_rng(7)
        noise = stationary_noise(cov, 0.984, rng, size=10)
        acc_sq = np.zeros(8)
        acc_lag = np.zeros(8)
        nsteps = 100_000
        for _ in range(nsteps):
            prev = noise.e
            noise = ar1_step(noise, cov, rng)
            acc_sq += (noise.e ** 2).sum(axis=0)
            acc_lag += (noise.e * prev).sum(axis=0)
        var = acc_sq / (nsteps * 10)
        np.testing.assert_allclose(var, 4.0, rtol=0.03)
        autocorr = acc_lag.sum() / acc_sq.sum()
        assert abs(autocorr - 0.984) < 0.002

    def test_one_step_preserves_stationary_law(self):
        # KS check: a stationary draw advanced one step still matches the
        # stationary marginal, component-wise.
        cov = build_covariance(IsotropicExponential(8), [2.0, 0.3])
        rng = np.random.default_rng(8)
        noise = stationary_noise(cov, 0.984, rng, size=100_000)
        stepped = ar1_step(noise, cov, rng)
        fresh = stationary_noise(cov, 0.984, rng, size=100_000)
        for comp in range(8):
            d = stats.ks_2samp(stepped.e[:, comp], fresh.e[:, comp]).statistic
            assert d < 0.01

    def test_invalid_phi_rejected(self):
        cov = build_covariance(IsotropicDiagonal(8), [1.0])
        with pytest.raises(ValueError):
            stationary_noise(cov, 1.0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            stationary_noise(cov, -0.1, np.random.default_rng(0))
