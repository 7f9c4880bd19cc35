"""VARMA test processes and the conjugate Bayesian VAR baseline.

Model: ``Z_t = sum_j B_j Z_{t-j} + e_t + sum_j C_j e_{t-j}`` with
``e_t = Sigma^{1/2} e~_t`` and unit-variance standardized innovations e~_t.

The Bayesian VAR uses the prior ``vec(B) ~ N(0, 1e4 I)`` and
``Sigma ~ IW(nu0, S0)`` with density kernel
``|Sigma|^{-(nu0 + d + 1)/2} exp(-tr(S0 Sigma^{-1}) / 2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.stats import invwishart

from .likelihood import TimeSeries

INNOVATIONS = ("gaussian", "student_t4", "centered_exponential")


@dataclass(frozen=True)
class VarmaModel:
    """AR coefficients (p, d, d), MA coefficients (q, d, d), innovation covariance and family."""

    ar: np.ndarray
    ma: np.ndarray
    sigma: np.ndarray
    innovations: str = "gaussian"

    def __post_init__(self):
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        d = sigma.shape[0]
        ar = np.asarray(self.ar, dtype=float).reshape(-1, d, d)
        ma = np.asarray(self.ma, dtype=float).reshape(-1, d, d)
        if sigma.shape != (d, d) or not np.allclose(sigma, sigma.T):
            raise ValueError("sigma must be a symmetric square matrix")
        if np.linalg.eigvalsh(sigma).min() <= 0:
            raise ValueError("sigma must be positive definite")
        if self.innovations not in INNOVATIONS:
            raise ValueError(f"innovations must be one of {INNOVATIONS}")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "ar", ar)
        object.__setattr__(self, "ma", ma)

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    @property
    def p(self) -> int:
        return self.ar.shape[0]

    @property
    def q(self) -> int:
        return self.ma.shape[0]

    def to_json(self) -> dict:
        return {"ar": self.ar.tolist(), "ma": self.ma.tolist(), "sigma": self.sigma.tolist(),
                "innovations": self.innovations}

    @classmethod
    def from_json(cls, obj: dict) -> "VarmaModel":
        sigma = np.asarray(obj["sigma"], dtype=float)
        d = sigma.shape[0]
        ar = np.asarray(obj.get("ar", []), dtype=float).reshape(-1, d, d)
        ma = np.asarray(obj.get("ma", []), dtype=float).reshape(-1, d, d)
        return cls(ar=ar, ma=ma, sigma=sigma, innovations=obj.get("innovations", "gaussian"))

    @classmethod
    def load(cls, path) -> "VarmaModel":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def var2_example(innovations: str = "gaussian") -> VarmaModel:
    """Bivariate VAR(2) benchmark process."""
    B1 = [[0.5, 0.0], [0.0, -0.3]]
    B2 = [[0.0, 0.0], [0.0, -0.5]]
    sigma = [[1.0, 0.9], [0.9, 1.0]]
    return VarmaModel(ar=np.array([B1, B2]), ma=np.zeros((0, 2, 2)), sigma=np.array(sigma), innovations=innovations)


def vma1_example(innovations: str = "gaussian") -> VarmaModel:
    """Bivariate VMA(1) benchmark process."""
    C1 = [[-0.75, 0.5], [0.5, 0.75]]
    sigma = [[1.0, 0.5], [0.5, 1.0]]
    return VarmaModel(ar=np.zeros((0, 2, 2)), ma=np.array([C1]), sigma=np.array(sigma), innovations=innovations)


def companion(ar: np.ndarray) -> np.ndarray:
    p, d, _ = ar.shape
    F = np.zeros((p * d, p * d))
    F[:d] = np.concatenate(list(ar), axis=1)
    F[d:, :-d] = np.eye((p - 1) * d)
    return F


def is_stable(model: VarmaModel) -> bool:
    if model.p == 0:
        return True
    return bool(np.abs(np.linalg.eigvals(companion(model.ar))).max() < 1.0)


def standardized_innovations(family: str, size, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean, unit-variance iid draws of the given family."""
    if family == "gaussian":
        return rng.standard_normal(size)
    if family == "student_t4":
        return rng.standard_t(4.0, size) * math.sqrt(0.5)
    if family == "centered_exponential":
        return rng.exponential(1.0, size) - 1.0
    raise ValueError(f"unknown innovation family {family!r}")


def symmetric_sqrt(S: np.ndarray) -> np.ndarray:
    lam, V = np.linalg.eigh(S)
    return (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T


def simulate_varma(model: VarmaModel, n: int, burn: int = 1000, rng: np.random.Generator | None = None) -> TimeSeries:
    """Simulate n observations after discarding ``burn`` steps from zero initial values."""
    if not is_stable(model):
        raise ValueError("AR polynomial is not stable")
    rng = np.random.default_rng() if rng is None else rng
    d, p, q = model.d, model.p, model.q
    total = n + burn
    e = standardized_innovations(model.innovations, (total + q, d), rng) @ symmetric_sqrt(model.sigma)
    Z = np.zeros((total + p, d))
    for t in range(total):
        z = e[t + q].copy()
        for j in range(q):
            z += model.ma[j] @ e[t + q - 1 - j]
        for j in range(p):
            z += model.ar[j] @ Z[t + p - 1 - j]
        Z[t + p] = z
    return TimeSeries(Z[p + burn:])


def transfer_parts(model: VarmaModel, omegas):
    """A(e^{-i omega}) and C(e^{-i omega}) for each frequency."""
    omegas = np.asarray(omegas, dtype=float)
    d = model.d
    A = np.broadcast_to(np.eye(d, dtype=complex), (omegas.size, d, d)).copy()
    C = A.copy()
    for j in range(model.p):
        A -= model.ar[j] * np.exp(-1j * (j + 1) * omegas)[:, None, None]
    for j in range(model.q):
        C += model.ma[j] * np.exp(-1j * (j + 1) * omegas)[:, None, None]
    return A, C


def true_spectral_density(model: VarmaModel, omegas) -> np.ndarray:
    """f(omega) = (1/2pi) A^{-1} C Sigma C^* A^{-*} on a frequency grid, shape (G, d, d)."""
    if not is_stable(model):
        raise ValueError("AR polynomial is not stable")
    A, C = transfer_parts(model, omegas)
    H = np.linalg.solve(A, C)
    f = H @ model.sigma @ np.conj(np.swapaxes(H, -1, -2)) / (2.0 * np.pi)
    return 0.5 * (f + np.conj(np.swapaxes(f, -1, -2)))


def autocovariance(model: VarmaModel, max_lag: int) -> np.ndarray:
    """Gamma(h) = E[Z_{t+h} Z_t^T] for h = 0..max_lag via the state-space Lyapunov equation."""
    d, p, q = model.d, model.p, model.q
    pz = max(p, 1)
    m = (pz + q + 1) * d
    F = np.zeros((m, m))
    G = np.zeros((m, d))
    # state X_t = (Z_t, ..., Z_{t-pz+1}, e_t, ..., e_{t-q}), pz = max(p, 1)
    for j in range(p):
        F[:d, j * d:(j + 1) * d] = model.ar[j]
    eo = pz * d
    for j in range(q):
        F[:d, eo + j * d:eo + (j + 1) * d] = model.ma[j]
    G[:d] = np.eye(d)
    for j in range(1, p):
        F[j * d:(j + 1) * d, (j - 1) * d:j * d] = np.eye(d)
    G[eo:eo + d] = np.eye(d)
    for j in range(1, q + 1):
        F[eo + j * d:eo + (j + 1) * d, eo + (j - 1) * d:eo + j * d] = np.eye(d)
    P = linalg.solve_discrete_lyapunov(F, G @ model.sigma @ G.T)
    out = np.empty((max_lag + 1, d, d))
    X = P
    for h in range(max_lag + 1):
        out[h] = X[:d, :d]
        X = F @ X
    return out


def lag_matrices(Z: np.ndarray, p: int, start: int | None = None):
    """Responses Y_t and stacked regressors (Z_{t-1}, ..., Z_{t-p}) for t >= start."""
    n, d = Z.shape
    start = p if start is None else start
    Y = Z[start:]
    X = np.concatenate([Z[start - j:n - j] for j in range(1, p + 1)], axis=1) if p else np.zeros((n - start, 0))
    return Y, X


def aic_values(ts: TimeSeries, p_max: int, p_min: int = 1) -> np.ndarray:
    """Least-squares AIC for orders p_min..p_max on the common sample t > p_max.

    AIC(p) = T log|Sigma_p| + 2 p d^2 with Sigma_p the residual covariance
    (divisor T).
    """
    if p_max < 1 or p_min < 0 or p_min > p_max:
        raise ValueError("need 0 <= p_min <= p_max and p_max >= 1")
    Z = ts.values
    d = ts.d
    out = np.empty(p_max - p_min + 1)
    for i, p in enumerate(range(p_min, p_max + 1)):
        Y, X = lag_matrices(Z, p, start=p_max)
        T = Y.shape[0]
        if p:
            coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
            E = Y - X @ coef
        else:
            E = Y
        _, logdet = np.linalg.slogdet(E.T @ E / T)
        out[i] = T * logdet + 2 * p * d * d
    return out


def select_order_aic(ts: TimeSeries, p_max: int, p_min: int = 1) -> int:
    """Order minimizing :func:`aic_values`; ties go to the smaller order."""
    # argmin returns the first minimizer
    return p_min + int(np.argmin(aic_values(ts, p_max, p_min)))


@dataclass
class VarPosterior:
    """Thinned Gibbs draws of (B_1..B_p, Sigma) and the implied spectra."""

    ar: np.ndarray
    sigma: np.ndarray
    spectra: np.ndarray | None
    omegas: np.ndarray | None
    p: int
    config: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.sigma.shape[0]

    def model(self, i: int) -> VarmaModel:
        d = self.sigma.shape[-1]
        return VarmaModel(ar=self.ar[i], ma=np.zeros((0, d, d)), sigma=self.sigma[i])


def sample_coefficients(XtX: np.ndarray, XtY: np.ndarray, Sigma: np.ndarray, prior_var: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Draw the (pd x d) coefficient matrix B | Sigma from its Gaussian full conditional.

    With vec stacking columns, the precision is ``I / prior_var + Sigma^{-1} kron X^T X``
    and the precision-weighted mean is ``vec(X^T Y Sigma^{-1})``.
    """
    m, d = XtY.shape
    cs = linalg.cho_factor(Sigma, lower=True)
    Sinv = linalg.cho_solve(cs, np.eye(d))
    Q = np.kron(Sinv, XtX) + np.eye(m * d) / prior_var
    b = linalg.cho_solve(cs, XtY.T).T.reshape(-1, order="F")
    cq = linalg.cholesky(Q, lower=True)
    mean = linalg.cho_solve((cq, True), b)
    z = rng.standard_normal(m * d)
    draw = mean + linalg.solve_triangular(cq.T, z, lower=False)
    return draw.reshape(m, d, order="F")


def fit_var(ts: TimeSeries, p: int, iterations: int = 80000, burn_in: int = 30000, thin: int = 5,
            rng: np.random.Generator | None = None, omegas=None, prior_var: float = 1e4,
            nu0: float = 1e-4, s0: float = 1e-4) -> VarPosterior:
    """Two-block Gibbs sampler for the conjugate Bayesian VAR(p) without intercept.

    Alternates ``B | Sigma`` (Gaussian) and ``Sigma | B`` ~ IW(nu0 + T, s0 I + E^T E).
    Spectra of the stored draws are evaluated at ``omegas`` when given.
    """
    rng = np.random.default_rng() if rng is None else rng
    n, d = ts.n, ts.d
    if p < 1:
        raise ValueError("VAR order must be at least 1")
    if n <= p * d + d:
        raise ValueError("series too short for the requested order")
    if not 0 <= burn_in < iterations or thin < 1:
        raise ValueError("need 0 <= burn_in < iterations and thin >= 1")
    Y, X = lag_matrices(ts.values, p)
    T = Y.shape[0]
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise np.linalg.LinAlgError("regressor matrix is rank deficient")
    XtX, XtY = X.T @ X, X.T @ Y
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    E = Y - X @ coef
    Sigma = E.T @ E / T
    M = (iterations - burn_in) // thin
    ars = np.empty((M, p, d, d))
    sigmas = np.empty((M, d, d))
    m = 0
    S0 = s0 * np.eye(d)
    for t in range(1, iterations + 1):
        Bm = sample_coefficients(XtX, XtY, Sigma, prior_var, rng)
        E = Y - X @ Bm
        scale = S0 + E.T @ E
        Sigma = np.atleast_2d(invwishart.rvs(df=nu0 + T, scale=scale, random_state=rng))
        if t > burn_in and (t - burn_in) % thin == 0 and m < M:
            # column block j of B^T is the lag-(j+1) coefficient matrix
            ars[m] = Bm.T.reshape(d, p, d).transpose(1, 0, 2)
            sigmas[m] = Sigma
            m += 1
    spectra = None
    if omegas is not None:
        omegas = np.asarray(omegas, dtype=float)
        spectra = np.empty((M, omegas.size, d, d), dtype=complex)
        for i in range(M):
            A, C = transfer_parts(VarmaModel(ar=ars[i], ma=np.zeros((0, d, d)), sigma=sigmas[i]), omegas)
            H = np.linalg.solve(A, C)
            f = H @ sigmas[i] @ np.conj(np.swapaxes(H, -1, -2)) / (2.0 * np.pi)
            spectra[i] = 0.5 * (f + np.conj(np.swapaxes(f, -1, -2)))
    conf = {"p": p, "iterations": iterations, "burn_in": burn_in, "thin": thin, "prior_var": prior_var,
            "nu0": nu0, "s0": s0}
    return VarPosterior(ar=ars, sigma=sigmas, spectra=spectra, omegas=omegas, p=p, config=conf)


def difference_lag(ts: TimeSeries, lag: int) -> TimeSeries:
    """Y_t = Z_t - Z_{t-lag}, of length n - lag."""
    if lag < 1 or lag >= ts.n:
        raise ValueError("lag must satisfy 1 <= lag < n")
    v = ts.values
    return TimeSeries(v[lag:] - v[:-lag])
