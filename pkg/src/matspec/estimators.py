"""Scikit-learn style estimators wrapping the nonparametric and VAR procedures.

Both estimators take a (n, d) array of observations in ``fit`` and expose
the posterior median spectral density through ``predict(omegas)``.
``score`` returns the Whittle log-likelihood of a series under the fitted
median.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_is_fitted

from .bernstein import BasisCache, BasisConfig, eval_spectral_density
from .gamma_process import homogeneous_spec
from .likelihood import TimeSeries, fourier_coefficients, fourier_frequencies, whittle_log_likelihood
from .sampler import SamplerConfig, run_chain
from .summaries import SpectralSummary, h_inverse, h_transform, summarize
from .var import fit_var, select_order_aic, true_spectral_density


def check_series(X, min_length: int | None = None) -> np.ndarray:
    """Validate observations as a finite float array of shape (n, d).

    A 1-d input is read as a univariate series.
    """
    X = check_array(X, ensure_2d=False, dtype=float, ensure_all_finite=True)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    min_length = 2 * d if min_length is None else min_length
    if n < min_length:
        raise ValueError(f"series of length {n} is too short (need at least {min_length})")
    return X


def check_grid(omegas) -> np.ndarray:
    """Validate a frequency grid inside [0, pi]."""
    w = check_array(omegas, ensure_2d=False, dtype=float, ensure_all_finite=True).ravel()
    if np.any(w < 0) or np.any(w > np.pi):
        raise ValueError("frequencies must lie in [0, pi]")
    return w


def as_generator(random_state) -> np.random.Generator:
    """``None``, an integer seed or a Generator, returned as a Generator."""
    if isinstance(random_state, np.random.RandomState):
        raise TypeError("pass an integer seed or numpy Generator, not a RandomState")
    return np.random.default_rng(random_state)


class _SpectralMixin:
    """Shared predict/score for fitted spectral estimators."""

    def predict(self, omegas=None) -> np.ndarray:
        """Posterior median spectral density, shape (len(omegas), d, d)."""
        check_is_fitted(self, "summary_")
        if omegas is None:
            return self.summary_.median.copy()
        w = check_grid(omegas)
        if np.array_equal(w, self.summary_.omegas):
            return self.summary_.median.copy()
        S = self._spectra_on(w)
        return summarize(S, w, level=self.level).median

    def score(self, X, y=None) -> float:
        """Whittle log-likelihood of ``X`` under the fitted posterior median."""
        check_is_fitted(self, "summary_")
        X = check_series(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("dimension differs from the fitted data")
        ts = TimeSeries(X).centered()[0] if self.center else TimeSeries(X)
        return whittle_log_likelihood(fourier_coefficients(ts), self.predict(fourier_frequencies(ts.n)))


class BernsteinSpectralEstimator(_SpectralMixin, BaseEstimator):
    """Nonparametric Bayesian spectral density estimator.

    Bernstein polynomial mixture prior with Hpd Gamma process weights and
    the Whittle likelihood, sampled by adaptive Metropolis-within-Gibbs.

    Parameters
    ----------
    alpha_mass : float
        Total mass of the process base measure.
    beta0 : float
        Homogeneous scale of the Gamma process.
    xi_l, xi_r, k_max, degree_prior_c
        Basis truncation, degree bound and degree prior constant.
    total_iterations, burn_in, thin, L
        Chain length and truncation (``L=None`` uses max(20, n^{1/3})).
    level : float
        Coverage of the uniform credibility region.
    grid : array_like, optional
        Frequencies for the stored spectra (default: Fourier frequencies).
    center : bool
        Subtract the sample mean before fitting.
    random_state : int, Generator or None

    Attributes
    ----------
    draws_ : PosteriorDraws
    summary_ : SpectralSummary
    n_features_in_ : int
    """

    def __init__(self, alpha_mass=2.0, beta0=1e-4, xi_l=0.1, xi_r=0.9, k_max=500, degree_prior_c=0.01,
                 total_iterations=80000, burn_in=30000, thin=5, L=None, target_acceptance=0.44,
                 adapt_cap=0.01, init_k=100, level=0.9, grid=None, center=True, random_state=None):
        self.alpha_mass = alpha_mass
        self.beta0 = beta0
        self.xi_l = xi_l
        self.xi_r = xi_r
        self.k_max = k_max
        self.degree_prior_c = degree_prior_c
        self.total_iterations = total_iterations
        self.burn_in = burn_in
        self.thin = thin
        self.L = L
        self.target_acceptance = target_acceptance
        self.adapt_cap = adapt_cap
        self.init_k = init_k
        self.level = level
        self.grid = grid
        self.center = center
        self.random_state = random_state

    def basis_config(self) -> BasisConfig:
        return BasisConfig(xi_l=self.xi_l, xi_r=self.xi_r, k_max=self.k_max, degree_prior_c=self.degree_prior_c)

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(total_iterations=self.total_iterations, burn_in=self.burn_in, thin=self.thin,
                             L=self.L, target_acceptance=self.target_acceptance, adapt_cap=self.adapt_cap,
                             init_k=min(self.init_k, self.k_max))

    def fit(self, X, y=None):
        X = check_series(X)
        ts = TimeSeries(X).centered()[0] if self.center else TimeSeries(X)
        self.n_features_in_ = ts.d
        self.spec_ = homogeneous_spec(ts.d, alpha_mass=self.alpha_mass, beta0=self.beta0)
        self.basis_ = self.basis_config()
        grid = None if self.grid is None else check_grid(self.grid)
        self.draws_ = run_chain(ts, self.spec_, self.basis_, self.sampler_config(), as_generator(self.random_state),
                                grid=grid)
        self.summary_ = summarize(self.draws_.spectra, self.draws_.omegas, level=self.level)
        self.n_ = ts.n
        return self

    def _spectra_on(self, w):
        cache = BasisCache(self.basis_, w)
        return np.stack([eval_spectral_density(s, self.basis_, w, cache) for s in self.draws_.states()])


class VarSpectralEstimator(_SpectralMixin, BaseEstimator):
    """Conjugate Bayesian VAR spectral density estimator with AIC order selection.

    Parameters
    ----------
    order : int or None
        VAR order; ``None`` selects it by AIC over ``1..p_max``.
    p_max : int
    iterations, burn_in, thin
        Gibbs chain length.
    prior_var : float
        Prior variance of each coefficient.
    nu0, s0 : float
        Inverse-Wishart degrees of freedom and scale multiplier.
    """

    def __init__(self, order=None, p_max=10, iterations=80000, burn_in=30000, thin=5, prior_var=1e4, nu0=1e-4,
                 s0=1e-4, level=0.9, grid=None, center=True, random_state=None):
        self.order = order
        self.p_max = p_max
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.prior_var = prior_var
        self.nu0 = nu0
        self.s0 = s0
        self.level = level
        self.grid = grid
        self.center = center
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_series(X)
        ts = TimeSeries(X).centered()[0] if self.center else TimeSeries(X)
        self.n_features_in_ = ts.d
        self.order_ = int(self.order) if self.order is not None else select_order_aic(ts, self.p_max)
        grid = fourier_frequencies(ts.n) if self.grid is None else check_grid(self.grid)
        self.posterior_ = fit_var(ts, self.order_, iterations=self.iterations, burn_in=self.burn_in, thin=self.thin,
                                  rng=as_generator(self.random_state), omegas=grid, prior_var=self.prior_var,
                                  nu0=self.nu0, s0=self.s0)
        self.summary_ = summarize(self.posterior_.spectra, grid, level=self.level)
        self.n_ = ts.n
        return self

    def _spectra_on(self, w):
        return np.stack([true_spectral_density(self.posterior_.model(i), w) for i in range(len(self.posterior_))])


class PeriodogramTransformer(TransformerMixin, BaseEstimator):
    """Map a series to its periodogram at the Fourier frequencies omega_1..omega_N.

    ``transform`` returns a complex array of shape (N, d, d).
    """

    def __init__(self, center=True):
        self.center = center

    def fit(self, X, y=None):
        X = check_series(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        if not hasattr(self, "n_features_in_"):
            raise NotFittedError("PeriodogramTransformer is not fitted")
        X = check_series(X)
        ts = TimeSeries(X).centered()[0] if self.center else TimeSeries(X)
        return fourier_coefficients(ts).periodogram()


class HTransformer(TransformerMixin, BaseEstimator):
    """Log-diagonal / real-imaginary coordinates of Hermitian matrices.

    ``transform`` maps (..., d, d) to (..., d^2); ``inverse_transform`` undoes it.
    """

    def fit(self, X, y=None):
        X = np.asarray(X)
        if X.ndim < 2 or X.shape[-1] != X.shape[-2]:
            raise ValueError("expected an array of square matrices")
        self.n_features_in_ = X.shape[-1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return h_transform(X)

    def inverse_transform(self, H):
        check_is_fitted(self, "n_features_in_")
        return h_inverse(H)


__all__ = ["BernsteinSpectralEstimator", "VarSpectralEstimator", "PeriodogramTransformer", "HTransformer",
           "SpectralSummary", "check_series", "check_grid", "as_generator"]
