"""Discrete Fourier coefficients, Whittle likelihoods and distance diagnostics.

Conventions
-----------
Fourier coefficients are ``Z~_j = n^{-1/2} sum_{t=1}^n Z_t exp(-i t omega_j)``
with ``omega_j = 2 pi j / n``.  The Whittle likelihood treats ``Z~_j``,
``j = 1..N`` with ``N = ceil(n/2) - 1``, as independent complex normal
vectors with covariance ``2 pi f(omega_j)``.  The extended form adds real
normal terms for ``Z~_0`` and, for even n, ``Z~_{n/2}``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

LOG_PI = math.log(math.pi)
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class TimeSeries:
    """Real observations of shape (n, d), with n >= 2d and finite entries."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValueError("time series must be a 2-d array of shape (n, d)")
        if not np.all(np.isfinite(v)):
            raise ValueError("time series contains non-finite values")
        if v.shape[0] < 2 * v.shape[1]:
            raise ValueError(f"need n >= 2d, got n={v.shape[0]}, d={v.shape[1]}")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def centered(self):
        """Return the mean-removed series and the component means."""
        mu = self.values.mean(axis=0)
        return TimeSeries(self.values - mu), mu


def n_whittle(n: int) -> int:
    """N = ceil(n/2) - 1, the number of interior Fourier frequencies."""
    return (n + 1) // 2 - 1


def fourier_frequencies(n: int) -> np.ndarray:
    """omega_1..omega_N."""
    return 2.0 * np.pi * np.arange(1, n_whittle(n) + 1) / n


@dataclass(frozen=True)
class FourierCoefficients:
    """Z~_0 .. Z~_{floor(n/2)} as an array of shape (floor(n/2) + 1, d)."""

    coef: np.ndarray
    n: int

    @property
    def d(self) -> int:
        return self.coef.shape[1]

    @property
    def N(self) -> int:
        return n_whittle(self.n)

    @property
    def omegas(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.coef.shape[0]) / self.n

    @property
    def interior(self) -> np.ndarray:
        return self.coef[1 : self.N + 1]

    @property
    def has_nyquist(self) -> bool:
        return self.n % 2 == 0

    def periodogram(self) -> np.ndarray:
        """Z~_j Z~_j^* / (2 pi) at omega_1..omega_N."""
        z = self.interior
        return np.einsum("gi,gj->gij", z, z.conj()) / (2.0 * np.pi)


def fourier_coefficients(ts: TimeSeries) -> FourierCoefficients:
    """FFT-based Z~_j for 0 <= j <= floor(n/2).

    The sum runs over t = 1..n, so relative to numpy's zero-based FFT each
    coefficient carries the phase ``exp(-i omega_j)``.
    """
    n = ts.n
    m = n // 2 + 1
    F = np.fft.fft(ts.values, axis=0)[:m]
    omegas = 2.0 * np.pi * np.arange(m) / n
    coef = F * np.exp(-1j * omegas)[:, None] / math.sqrt(n)
    coef[0] = coef[0].real
    if n % 2 == 0:
        coef[-1] = coef[-1].real
    return FourierCoefficients(coef=coef, n=n)


def _batched_cholesky(S: np.ndarray):
    """Lower Cholesky factors of a stack of Hermitian matrices, or None if any fails."""
    d = S.shape[-1]
    if d == 1:
        a = S[..., 0, 0].real
        if np.any(~(a > 0)):
            return None
        return np.sqrt(a)[..., None, None].astype(S.dtype)
    if d == 2:
        a = S[..., 0, 0].real
        if np.any(~(a > 0)):
            return None
        l11 = np.sqrt(a)
        l21 = S[..., 1, 0] / l11
        rem = S[..., 1, 1].real - np.abs(l21) ** 2
        if np.any(~(rem > 0)):
            return None
        Lc = np.zeros(S.shape, dtype=S.dtype)
        Lc[..., 0, 0] = l11
        Lc[..., 1, 0] = l21
        Lc[..., 1, 1] = np.sqrt(rem)
        return Lc
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return None


def _forward_substitution(Lc: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Solve Lc y = z for a stack of lower triangular systems."""
    d = Lc.shape[-1]
    y = np.empty(z.shape, dtype=np.result_type(Lc, z))
    for i in range(d):
        acc = z[..., i]
        if i:
            acc = acc - np.einsum("...k,...k->...", Lc[..., i, :i], y[..., :i])
        y[..., i] = acc / Lc[..., i, i]
    return y


def gaussian_terms(S: np.ndarray, z: np.ndarray):
    """Per-row ``log|S|`` and ``z^* S^{-1} z`` via Cholesky; None if any S is not Pd."""
    Lc = _batched_cholesky(S)
    if Lc is None:
        return None
    diag = np.diagonal(Lc, axis1=-2, axis2=-1).real
    logdet = 2.0 * np.sum(np.log(diag), axis=-1)
    y = _forward_substitution(Lc, z)
    quad = np.sum(np.abs(y) ** 2, axis=-1)
    return logdet, quad


def whittle_log_likelihood(fc: FourierCoefficients, f_at_freqs) -> float:
    """Whittle log-likelihood over omega_1..omega_N.

    Parameters
    ----------
    fc : FourierCoefficients
    f_at_freqs : array_like, shape (N, d, d)
        Spectral density at the interior Fourier frequencies.

    Returns
    -------
    float
        ``-inf`` when some f(omega_j) is not positive definite.
    """
    f = np.asarray(f_at_freqs)
    N, d = fc.N, fc.d
    if f.shape != (N, d, d):
        raise ValueError(f"expected f of shape {(N, d, d)}, got {f.shape}")
    if N == 0:
        return 0.0
    terms = gaussian_terms(f, fc.interior)
    if terms is None:
        return -math.inf
    logdet, quad = terms
    total = -N * d * LOG_PI - N * d * LOG_2PI - np.sum(logdet) - np.sum(quad) / (2.0 * np.pi)
    return float(total) if np.isfinite(total) else -math.inf


def _real_normal_logpdf(x: np.ndarray, S: np.ndarray) -> float:
    terms = gaussian_terms(S[None], x[None])
    if terms is None:
        return -math.inf
    logdet, quad = terms
    k = x.shape[-1]
    return float(-0.5 * k * LOG_2PI - 0.5 * logdet[0] - 0.5 * quad[0])


def _edge_terms(fc: FourierCoefficients, f_zero, f_pi) -> float:
    out = _real_normal_logpdf(fc.coef[0].real, 2.0 * np.pi * np.real(f_zero))
    if fc.has_nyquist:
        if f_pi is None:
            raise ValueError("f(pi) is required for even n")
        out += _real_normal_logpdf(fc.coef[-1].real, 2.0 * np.pi * np.real(f_pi))
    return out


def split_extended(fc: FourierCoefficients, f_full):
    """Split f at omega_0..omega_{floor(n/2)} into (f(0), interior, f(pi) or None)."""
    f_full = np.asarray(f_full)
    m = fc.coef.shape[0]
    if f_full.shape[0] != m:
        raise ValueError(f"expected f at {m} frequencies omega_0..omega_floor(n/2)")
    f_pi = f_full[-1] if fc.has_nyquist else None
    return f_full[0], f_full[1 : fc.N + 1], f_pi


def extended_whittle_log_likelihood(fc: FourierCoefficients, f_full) -> float:
    """Whittle likelihood plus the real normal terms at omega = 0 and (even n) omega = pi.

    ``f_full`` holds f at omega_0..omega_{floor(n/2)}.
    """
    f0, fin, fpi = split_extended(fc, f_full)
    w = whittle_log_likelihood(fc, fin)
    if not np.isfinite(w):
        return -math.inf
    return w + _edge_terms(fc, f0, fpi)


def realify(A: np.ndarray) -> np.ndarray:
    """Block map A -> [[Re A, -Im A], [Im A, Re A]] over leading axes."""
    re, im = A.real, A.imag
    top = np.concatenate([re, -im], axis=-1)
    bot = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def real_valued_whittle_log_likelihood(fc: FourierCoefficients, f_full) -> float:
    """Real Gaussian form of the extended Whittle likelihood.

    The stacked vector (Z~_0, Re Z~_1, Im Z~_1, ..., Z~_{n/2}) is normal with
    block diagonal covariance diag(2 pi f(0), pi B f(omega_1), ..., 2 pi f(pi)),
    B the realification map.  Evaluated block by block.
    """
    f0, fin, fpi = split_extended(fc, f_full)
    z = fc.interior
    x = np.concatenate([z.real, z.imag], axis=-1)
    S = np.pi * realify(np.asarray(fin, dtype=complex))
    total = 0.0
    if fc.N:
        terms = gaussian_terms(S, x)
        if terms is None:
            return -math.inf
        logdet, quad = terms
        total = float(-fc.N * fc.d * LOG_2PI - 0.5 * np.sum(logdet) - 0.5 * np.sum(quad))
    return total + _edge_terms(fc, f0, fpi)


def block_toeplitz(autocov: np.ndarray) -> np.ndarray:
    """nd x nd covariance of (Z_1, ..., Z_n) with block (s, t) = Gamma(s - t).

    ``autocov[h]`` is Gamma(h) = E[Z_{t+h} Z_t^T] for h = 0..n-1 and
    Gamma(-h) = Gamma(h)^T.
    """
    G = np.asarray(autocov, dtype=float)
    n, d, _ = G.shape
    idx = np.arange(n)
    lag = idx[:, None] - idx[None, :]
    blocks = np.where((lag >= 0)[..., None, None], G[np.abs(lag)], np.swapaxes(G[np.abs(lag)], -1, -2))
    return blocks.transpose(0, 2, 1, 3).reshape(n * d, n * d)


def exact_gaussian_log_likelihood(ts: TimeSeries, autocov) -> float:
    """Exact zero-mean Gaussian log-likelihood from autocovariances Gamma(0..n-1).

    Raises
    ------
    LinAlgError
        If the block Toeplitz covariance is not positive definite.
    """
    G = np.asarray(autocov, dtype=float)
    n, d = ts.n, ts.d
    if G.shape[0] < n or G.shape[1:] != (d, d):
        raise ValueError(f"need Gamma(h) for h = 0..{n - 1}, each {d} x {d}")
    S = block_toeplitz(G[:n])
    try:
        c = cho_factor(S, lower=True)
    except LinAlgError as exc:
        raise LinAlgError("block Toeplitz covariance is not positive definite") from exc
    z = ts.values.reshape(-1)
    quad = float(z @ cho_solve(c, z))
    logdet = 2.0 * float(np.sum(np.log(np.diag(c[0]))))
    return -0.5 * n * d * LOG_2PI - 0.5 * logdet - 0.5 * quad


def autocov_from_f(f, n_lags: int, grid_size: int = 4096) -> np.ndarray:
    """Gamma(h) = 2 Re int_0^pi f(omega) exp(i h omega) d omega, h = 0..n_lags-1.

    Trapezoid rule on ``max(grid_size, 4 n_lags) + 1`` equispaced points;
    since the integrand extends to a smooth periodic function the rule is
    spectrally accurate.  ``f`` maps an array of frequencies to (G, d, d).
    """
    m = max(grid_size, 4 * n_lags)
    w = np.linspace(0.0, np.pi, m + 1)
    F = np.asarray(f(w), dtype=complex)
    if F.ndim == 1:
        F = F[:, None, None]
    weights = np.full(m + 1, np.pi / m)
    weights[[0, -1]] *= 0.5
    h = np.arange(n_lags)
    E = np.exp(1j * np.outer(h, w)) * weights
    return 2.0 * np.einsum("hg,gij->hij", E, F).real


def lambda_n(ts: TimeSeries, f, grid_size: int = 4096) -> float:
    """Extended Whittle minus exact Gaussian log-likelihood of the Fourier coefficients.

    The Fourier vector (Z~_0, Re Z~_j, Im Z~_j, ..., Z~_{n/2}) is a linear
    image of the data with Jacobian 2^{-N d}, so its exact log density is the
    time-domain log-likelihood plus N d log 2.
    """
    fc = fourier_coefficients(ts)
    f_full = np.asarray(f(fc.omegas), dtype=complex)
    if f_full.ndim == 1:
        f_full = f_full[:, None, None]
    ext = extended_whittle_log_likelihood(fc, f_full)
    G = autocov_from_f(f, ts.n, grid_size)
    exact = exact_gaussian_log_likelihood(ts, G) + fc.N * ts.d * math.log(2.0)
    return ext - exact


def _check_hpd_pair(S1, S2):
    S1 = np.asarray(S1, dtype=complex)
    S2 = np.asarray(S2, dtype=complex)
    if S1.ndim == 0:
        S1, S2 = S1.reshape(1, 1), S2.reshape(1, 1)
    if S1.shape != S2.shape or S1.shape[-1] != S1.shape[-2]:
        raise ValueError("Hellinger needs two square matrices of equal shape")
    for S in (S1, S2):
        if not np.allclose(S, np.swapaxes(S, -1, -2).conj(), atol=1e-10 * max(1.0, float(np.abs(S).max()))):
            raise ValueError("matrix is not Hermitian")
    return S1, S2


def _whitened_eigs(S1, S2) -> np.ndarray:
    L2 = _batched_cholesky(0.5 * (S2 + np.swapaxes(S2, -1, -2).conj()))
    if L2 is None:
        raise ValueError("second matrix is not positive definite")
    # M = L2^{-1} S1 L2^{-*} has the eigenvalues of S2^{-1/2} S1 S2^{-1/2};
    # columns are solved as rows of the transposed right-hand side
    Lb = L2[..., None, :, :]
    A = np.swapaxes(_forward_substitution(Lb, np.swapaxes(S1, -1, -2)), -1, -2)
    M = np.swapaxes(_forward_substitution(Lb, A.conj()), -1, -2)
    b = np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2).conj()))
    if np.any(b <= 0):
        raise ValueError("first matrix is not positive definite")
    return b


def hellinger_complex_normal(S1, S2, method: str = "eig"):
    """Squared Hellinger distance between CN_d(0, S1) and CN_d(0, S2).

    ``1 - prod_j 2 sqrt(b_j) / (1 + b_j)`` with b_j the eigenvalues of
    ``S2^{-1/2} S1 S2^{-1/2}`` (``method="eig"``), or equivalently
    ``1 - 2^d |S1|^{1/2} |S2|^{1/2} / |S1 + S2|`` (``method="det"``).
    Both accept stacks of matrices over leading axes.

    >>> round(float(hellinger_complex_normal(1.0, 4.0)), 12)
    0.2
    """
    S1, S2 = _check_hpd_pair(S1, S2)
    d = S1.shape[-1]
    if method == "eig":
        b = _whitened_eigs(S1, S2)
        log_aff = np.sum(math.log(2.0) + 0.5 * np.log(b) - np.log1p(b), axis=-1)
    elif method == "det":
        s1, l1 = np.linalg.slogdet(S1)
        s2, l2 = np.linalg.slogdet(S2)
        s3, l3 = np.linalg.slogdet(S1 + S2)
        if np.any(np.real(s1) <= 0) or np.any(np.real(s2) <= 0) or np.any(np.real(s3) <= 0):
            raise ValueError("matrices must be positive definite")
        log_aff = d * math.log(2.0) + 0.5 * l1 + 0.5 * l2 - l3
    else:
        raise ValueError("method must be 'eig' or 'det'")
    return -np.expm1(log_aff)


def _on_fourier_grid(f, n: int) -> np.ndarray:
    if callable(f):
        f = f(fourier_frequencies(n))
    f = np.asarray(f, dtype=complex)
    if f.ndim == 1:
        f = f[:, None, None]
    if f.shape[0] != n_whittle(n):
        raise ValueError("spectral density must be given at omega_1..omega_N")
    return f


def average_hellinger(f1, f2, n: int) -> float:
    """Average squared Hellinger distance over omega_1..omega_N.

    ``f1`` and ``f2`` are callables of a frequency array or arrays of shape
    (N, d, d).  Returns the squared distance.
    """
    A = _on_fourier_grid(f1, n)
    B = _on_fourier_grid(f2, n)
    return float(np.mean(hellinger_complex_normal(2.0 * np.pi * A, 2.0 * np.pi * B)))


def kl_complex_normal(S0, S) -> float:
    """KL(CN(0, S0) || CN(0, S)) = tr(S^{-1} S0) - d - log|S^{-1} S0|."""
    S0, S = _check_hpd_pair(S0, S)
    b = _whitened_eigs(S0, S)
    return np.sum(b - 1.0 - np.log(b), axis=-1)


def average_kl(f0, f, n: int) -> float:
    """Average of KL(p(.|f0(omega_j)) || p(.|f(omega_j))) over omega_1..omega_N."""
    A = _on_fourier_grid(f0, n)
    B = _on_fourier_grid(f, n)
    return float(np.mean(kl_complex_normal(2.0 * np.pi * A, 2.0 * np.pi * B)))


def write_fourier_csv(fc: FourierCoefficients, path) -> None:
    """Dump coefficients as CSV with columns j, omega, re_1, im_1, ..., re_d, im_d."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["j", "omega"]
        for c in range(1, fc.d + 1):
            head += [f"re_{c}", f"im_{c}"]
        w.writerow(head)
        for j, (om, z) in enumerate(zip(fc.omegas, fc.coef)):
            row = [str(j), "%.17g" % om]
            for v in z:
                row += ["%.17g" % v.real, "%.17g" % v.imag]
            w.writerow(row)


class WhittleEvaluator:
    """Repeated Whittle evaluations for fixed data, as used inside MCMC.

    Precomputes the coefficient arrays once; for d = 1 and d = 2 the
    Cholesky factorization is unrolled on real and imaginary parts.
    Agrees with :func:`whittle_log_likelihood` to rounding.
    """

    def __init__(self, fc: FourierCoefficients):
        self.fc = fc
        self.N, self.d = fc.N, fc.d
        z = fc.interior
        self.z = z
        self.const = -self.N * self.d * (LOG_PI + LOG_2PI)
        if self.d == 1:
            self.p1 = np.abs(z[:, 0]) ** 2
        elif self.d == 2:
            self.z1r, self.z1i = z[:, 0].real.copy(), z[:, 0].imag.copy()
            self.z2r, self.z2i = z[:, 1].real.copy(), z[:, 1].imag.copy()

    def __call__(self, f) -> float:
        if self.N == 0:
            return 0.0
        if self.d == 1:
            a = f[:, 0, 0].real
            if not np.all(a > 0):
                return -math.inf
            return float(self.const - np.sum(np.log(a)) - np.sum(self.p1 / a) / (2.0 * np.pi))
        if self.d == 2:
            a = f[:, 0, 0].real
            c = f[:, 1, 1].real
            br = f[:, 1, 0].real
            bi = f[:, 1, 0].imag
            if not np.all(a > 0):
                return -math.inf
            l21r = br / np.sqrt(a)
            l21i = bi / np.sqrt(a)
            rem = c - (l21r * l21r + l21i * l21i)
            if not np.all(rem > 0):
                return -math.inf
            sa = np.sqrt(a)
            y1r = self.z1r / sa
            y1i = self.z1i / sa
            # y2 = (z2 - l21 y1) / sqrt(rem)
            tr = self.z2r - (l21r * y1r - l21i * y1i)
            ti = self.z2i - (l21r * y1i + l21i * y1r)
            quad = y1r * y1r + y1i * y1i + (tr * tr + ti * ti) / rem
            logdet = np.log(a * rem)
            return float(self.const - np.sum(logdet) - np.sum(quad) / (2.0 * np.pi))
        return whittle_log_likelihood(self.fc, f)
