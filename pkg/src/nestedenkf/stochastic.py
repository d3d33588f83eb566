"""Stochastic model-error parameterization: covariance models and AR(1) noise.

Four covariance families describe the spatial structure of the red-noise
forcing on the N-site ring; their parameter vectors are what the outer filter
estimates. Proposed parameters may be invalid (negative amplitudes, indefinite
circulants), so building a covariance always goes through a repair step first
(\"repair then proceed\"): amplitude-like parameters are clamped and circulant
spectra are clipped at a small floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NestedEnkfError
from .validation import as_float_array

EPS = 1e-8  # amplitude clamp / eigenvalue floor


def ring_distance(i, j, n):
    """Cyclic distance between sites i and j on a ring of n sites."""
    d = np.abs(np.asarray(i) - np.asarray(j))
    return np.minimum(d, n - d)


@dataclass
class CovarianceMatrix:
    """A covariance with its lower-triangular Cholesky factor."""

    sigma: np.ndarray
    chol: np.ndarray

    @property
    def n(self):
        return self.sigma.shape[0]


@dataclass(frozen=True)
class CovarianceModelBase:
    n: int

    def _check(self, values):
        v = as_float_array(values, "theta", ndim=1)
        if v.size != self.dim:
            raise ValueError(f"{type(self).__name__} expects {self.dim} "
                             f"parameters, got {v.size}")
        return v


@dataclass(frozen=True)
class IsotropicDiagonal(CovarianceModelBase):
    """sigma^2 * I — a single noise amplitude sigma."""

    tag = "iso_diag"

    @property
    def dim(self):
        return 1

    @property
    def names(self):
        return ("sigma",)

    def project(self, values):
        v = self._check(values)
        return np.array([max(v[0], EPS)])

    def build(self, values):
        v = self._check(values)
        return v[0] ** 2 * np.eye(self.n)


@dataclass(frozen=True)
class IsotropicExponential(CovarianceModelBase):
    """sigma^2 * exp(-rho * d_ij) with d the ring distance."""

    tag = "iso_exp"

    @property
    def dim(self):
        return 2

    @property
    def names(self):
        return ("sigma", "rho")

    def project(self, values):
        v = self._check(values)
        return np.array([max(v[0], EPS), max(v[1], 0.0)])

    def build(self, values):
        v = self._check(values)
        idx = np.arange(self.n)
        d = ring_distance(idx[:, None], idx[None, :], self.n)
        return v[0] ** 2 * np.exp(-v[1] * d)


@dataclass(frozen=True)
class SymmetricCirculant(CovarianceModelBase):
    """Symmetric circulant with first row (v, c1, ..., c_{n//2}, ..., c1).

    Parameters are the variance v and the covariances at each ring distance;
    nothing constrains them individually, so the projection clips the (real)
    circulant eigenvalues — the DFT of the first row — at the floor EPS and
    maps the result back to parameters.
    """

    tag = "circulant_sym"

    @property
    def dim(self):
        return 1 + self.n // 2

    @property
    def names(self):
        return ("var",) + tuple(f"c{k}" for k in range(1, self.n // 2 + 1))

    def _row(self, values):
        return np.concatenate([values, values[(self.n - 1) // 2:0:-1]])

    def project(self, values):
        v = self._check(values)
        lam = np.fft.fft(self._row(v)).real
        if lam.min() >= EPS:
            return v
        row = np.fft.ifft(np.maximum(lam, EPS)).real
        return row[:self.dim]

    def build(self, values):
        v = self._check(values)
        row = self._row(v)
        idx = np.arange(self.n)
        return row[(idx[None, :] - idx[:, None]) % self.n]


@dataclass(frozen=True)
class AnisotropicDiagonal(CovarianceModelBase):
    """diag(s_1^2, ..., s_n^2) — one noise amplitude per site."""

    tag = "aniso_diag"

    @property
    def dim(self):
        return self.n

    @property
    def names(self):
        return tuple(f"s{k}" for k in range(1, self.n + 1))

    def project(self, values):
        return np.maximum(self._check(values), EPS)

    def build(self, values):
        return np.diag(self._check(values) ** 2)


COVARIANCE_MODELS = {
    cls.tag: cls for cls in (IsotropicDiagonal, IsotropicExponential,
                             SymmetricCirculant, AnisotropicDiagonal)
}


def project_psd(sigma, model=None):
    """Repair a proposed covariance matrix to symmetric PSD.

    Circulant models clip the spectrum (DFT of the first row) at EPS;
    diagonal models clamp the diagonal at EPS^2; anything else gets a generic
    symmetric eigenvalue clip at EPS. Idempotent, and healthy input passes
    through (up to round-off of the eigen/DFT round trip).
    """
    sigma = as_float_array(sigma, "sigma", ndim=2)
    if sigma.shape[0] != sigma.shape[1]:
        raise ValueError("sigma must be square")
    if isinstance(model, SymmetricCirculant):
        lam = np.fft.fft(sigma[0]).real
        if lam.min() >= EPS:
            return sigma
        row = np.fft.ifft(np.maximum(lam, EPS)).real
        idx = np.arange(sigma.shape[0])
        return row[(idx[None, :] - idx[:, None]) % sigma.shape[0]]
    if isinstance(model, (IsotropicDiagonal, AnisotropicDiagonal)):
        out = sigma.copy()
        d = np.diag(out).copy()
        np.fill_diagonal(out, np.maximum(d, EPS ** 2))
        return out
    sym = 0.5 * (sigma + sigma.T)
    w, v = np.linalg.eigh(sym)
    if w.min() >= EPS:
        return sigma
    return (v * np.maximum(w, EPS)) @ v.T


def build_covariance(model, values):
    """Project parameters, build the covariance, and factorize it."""
    sigma = model.build(model.project(np.asarray(values, dtype=float)))
    sigma = 0.5 * (sigma + sigma.T)
    for attempt in range(3):
        try:
            return CovarianceMatrix(sigma=sigma, chol=np.linalg.cholesky(sigma))
        except np.linalg.LinAlgError:
            if attempt == 0:
                sigma = project_psd(sigma, model)
                sigma = 0.5 * (sigma + sigma.T)
            else:
                sigma = sigma + (EPS * max(np.trace(sigma) / len(sigma), 1.0)
                                 ) * np.eye(len(sigma))
    raise NestedEnkfError("covariance factorization failed after repair")


def sample_gaussian(cov, rng, size=None):
    """Draw N(0, cov.sigma) samples using the Cholesky factor.

    size=None gives one (n,) draw; an int or tuple prepends batch axes.
    """
    if size is None:
        shape = (cov.n,)
    elif np.isscalar(size):
        shape = (int(size), cov.n)
    else:
        shape = tuple(size) + (cov.n,)
    return rng.standard_normal(shape) @ cov.chol.T


@dataclass
class Ar1Noise:
    """AR(1) red-noise state; e has shape (..., n) for batched chains."""

    e: np.ndarray
    phi: float


def stationary_noise(cov, phi, rng, size=None):
    """Initialize AR(1) chains from the stationary law N(0, cov.sigma)."""
    if not 0.0 <= phi < 1.0:
        raise ValueError(f"phi must lie in [0, 1), got {phi}")
    return Ar1Noise(e=sample_gaussian(cov, rng, size=size), phi=phi)


def ar1_step(noise, cov, rng):
    """One step e' = phi e + sqrt(1 - phi^2) eta, eta ~ N(0, cov.sigma)."""
    phi = noise.phi
    eta = rng.standard_normal(noise.e.shape) @ cov.chol.T
    return Ar1Noise(e=phi * noise.e + np.sqrt(1.0 - phi * phi) * eta, phi=phi)
