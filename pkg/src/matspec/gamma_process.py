"""Hpd Gamma process: Levy tail, inverse-Levy series sampling and AGamma moments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .expint import exp1, inverse_exp1, log_exp1, log_exp1_from_log
from .hpd import hpd_sqrt, log_unit_sphere_volume, matrix_from_json, matrix_to_json, sample_uniform_unit_hpd


def levy_tail(r, a, b, *, log_r=None):
    """Tail mass a * E1(b r) of the measure a exp(-b r)/r dr on [r, inf).

    ``log_r`` may be given instead of ``r`` for radii below the double range.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("levy_tail needs a > 0 and b > 0")
    if log_r is not None:
        return a * np.exp(log_exp1_from_log(np.asarray(log_r, dtype=float) + np.log(b)))
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("levy_tail needs r > 0")
    return a * exp1(b * r)


def log_levy_tail(r, a, b):
    """log of :func:`levy_tail`, finite where the tail mass itself underflows."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(np.asarray(a) <= 0) or np.any(np.asarray(b) <= 0):
        raise ValueError("log_levy_tail needs r, a, b > 0")
    return np.log(a) + log_exp1(np.asarray(b, dtype=float) * r)


def inverse_levy(w, a, b, *, return_log: bool = False):
    """The unique r > 0 with ``levy_tail(r, a, b) == w``.

    With ``return_log=True`` returns log r, which remains exact when r
    underflows (w/a larger than about 708).
    """
    w = np.asarray(w, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(w <= 0) or np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("inverse_levy needs w, a, b > 0")
    log_x = inverse_exp1(w / a, return_log=True)
    log_r = log_x - np.log(b)
    if return_log:
        return log_r
    return np.exp(np.maximum(log_r, np.log(np.finfo(float).tiny)))


@dataclass(frozen=True)
class GammaProcessSpec:
    """Parameters of GP_{dxd}(alpha, beta) on [0, pi].

    ``alpha_density(x, U)`` is the Lebesgue density of alpha in (x, U),
    ``total_mass`` its integral C_alpha and ``alpha_star_sampler(rng, size)``
    draws ``(x, U)`` from alpha / C_alpha.  ``beta(x, U)`` is vectorised over
    a leading atom axis.  ``homogeneous_beta`` and ``log_alpha_star_constant``
    are optional shortcuts for constant rate and constant alpha* density.  The integrability condition on the mean measure
    is the caller's responsibility; see :func:`integrability_estimate`.
    """

    d: int
    alpha_density: Callable
    total_mass: float
    alpha_star_sampler: Callable
    beta: Callable
    beta_lower_bound: float
    homogeneous_beta: float | None = None
    log_alpha_star_constant: float | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.total_mass > 0 and math.isfinite(self.total_mass)):
            raise ValueError("total mass C_alpha must be finite and positive")
        if not self.beta_lower_bound > 0:
            raise ValueError("beta lower bound must be positive")

    def log_alpha_star_density(self, x, U) -> np.ndarray:
        return np.log(self.alpha_density(x, U)) - math.log(self.total_mass)


def homogeneous_spec(d: int, alpha_mass: float = 2.0, beta0: float = 1e-4) -> GammaProcessSpec:
    """Constant alpha density on [0, pi] x sphere, with total sphere mass ``alpha_mass``.

    The default corresponds to alpha_0 = 2 x (uniform law on the sphere) and
    rate 1e-4 at every location.
    """
    log_vol = log_unit_sphere_volume(d)
    g = alpha_mass * math.exp(-log_vol)

    def alpha_density(x, U):
        return np.full(np.shape(x), g)

    def sampler(rng, size):
        rx, ru = rng.spawn(2)
        return rx.uniform(0.0, np.pi, size), sample_uniform_unit_hpd(d, ru, size)

    def beta(x, U):
        return np.full(np.shape(x), beta0)

    return GammaProcessSpec(
        d=d,
        alpha_density=alpha_density,
        total_mass=math.pi * alpha_mass,
        alpha_star_sampler=sampler,
        beta=beta,
        beta_lower_bound=beta0,
        homogeneous_beta=beta0,
        log_alpha_star_constant=-math.log(math.pi) - log_vol,
        name="homogeneous",
        params={"alpha_mass": alpha_mass, "beta0": beta0},
    )


@dataclass(frozen=True)
class AGammaParams:
    eta: float
    omega: float
    Sigma: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.Sigma).shape[0]
        if not self.eta > d - 1:
            raise ValueError("AGamma requires eta > d - 1")
        if not self.omega > 0:
            raise ValueError("AGamma requires omega > 0")
        if np.any(np.linalg.eigvalsh(np.asarray(self.Sigma, dtype=complex)) <= 0):
            raise ValueError("AGamma requires an Hpd Sigma")


def log_complex_multivariate_gamma(eta: float, d: int) -> float:
    k = np.arange(1, d + 1)
    return 0.5 * d * (d - 1) * math.log(math.pi) + float(np.sum(gammaln(eta - k + 1)))


def sample_complex_wishart(eta: float, Sigma, rng: np.random.Generator, size: int) -> np.ndarray:
    """Complex Wishart draws with shape ``eta`` and scale ``Sigma`` (mean ``eta Sigma``).

    Bartlett construction: T lower triangular, |T_ii|^2 ~ Gamma(eta - i + 1),
    off-diagonal entries standard complex normal.
    """
    Sigma = np.asarray(Sigma, dtype=complex)
    d = Sigma.shape[0]
    T = np.zeros((size, d, d), dtype=complex)
    shapes = eta - np.arange(d)
    T[:, np.arange(d), np.arange(d)] = np.sqrt(rng.gamma(shapes, 1.0, size=(size, d)))
    rows, cols = np.tril_indices(d, -1)
    if rows.size:
        z = rng.standard_normal((size, rows.size, 2)) / math.sqrt(2.0)
        T[:, rows, cols] = z[..., 0] + 1j * z[..., 1]
    S = hpd_sqrt(Sigma)
    W = T @ np.conj(np.swapaxes(T, -1, -2))
    return S @ W @ S


def agamma_spec(p: AGammaParams) -> GammaProcessSpec:
    """Process on [0, pi] whose total increment is AGamma(eta, omega, Sigma).

    alpha(x, dU) = (omega / pi) alpha_{eta,Sigma}(dU), beta(U) = tr(Sigma^{-1} U).
    """
    Sigma = np.asarray(p.Sigma, dtype=complex)
    d = Sigma.shape[0]
    eta, omega = float(p.eta), float(p.omega)
    Sinv = np.linalg.inv(Sigma)
    _, logdet_sigma = np.linalg.slogdet(Sigma)
    log_const = -eta * logdet_sigma + gammaln(d * eta) - log_complex_multivariate_gamma(eta, d)

    def beta(x, U):
        return np.einsum("ij,...ji->...", Sinv, U).real

    def alpha_density(x, U):
        _, logdet_u = np.linalg.slogdet(U)
        b = beta(x, U)
        return (omega / math.pi) * np.exp(log_const - d * eta * np.log(b) + (eta - d) * logdet_u)

    def sampler(rng, size):
        rx, ru = rng.spawn(2)
        X = sample_complex_wishart(eta, Sigma, ru, size)
        tr = np.trace(X, axis1=-2, axis2=-1).real
        return rx.uniform(0.0, np.pi, size), X / tr[:, None, None]

    return GammaProcessSpec(
        d=d,
        alpha_density=alpha_density,
        total_mass=omega,
        alpha_star_sampler=sampler,
        beta=beta,
        beta_lower_bound=float(1.0 / np.linalg.eigvalsh(Sigma).max()),
        name="agamma",
        params={"eta": eta, "omega": omega},
    )


def agamma_moments(p: AGammaParams):
    """Closed-form mean and covariance of AGamma(eta, omega, Sigma).

    The covariance is ``E[X kron X] - E[X] kron E[X]`` as a d^2 x d^2 matrix.
    """
    Sigma = np.asarray(p.Sigma, dtype=complex)
    d = Sigma.shape[0]
    mean = p.omega / d * Sigma
    H = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            Eij = np.zeros((d, d))
            Eij[i, j] = 1.0
            H += np.kron(Eij, Eij.T)
    cov = p.omega / (d * (p.eta * d + 1)) * (p.eta * np.eye(d * d) + H) @ np.kron(Sigma, Sigma)
    return mean, cov


@dataclass(frozen=True)
class ProcessAtoms:
    """Atoms (x_j, U_j, r_j) of a truncated series draw."""

    x: np.ndarray
    U: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        if not (len(self.x) == len(self.r) == len(self.U)):
            raise ValueError("atom arrays must have equal length")
        if np.any(self.x < 0) or np.any(self.x > np.pi):
            raise ValueError("atom locations must lie in [0, pi]")
        if np.any(self.r <= 0):
            raise ValueError("atom radii must be positive")

    @property
    def L(self) -> int:
        return len(self.r)

    @property
    def d(self) -> int:
        return self.U.shape[-1]

    def total(self) -> np.ndarray:
        return np.einsum("l,lij->ij", self.r, self.U)

    def to_json(self) -> list:
        return [
            {"x": float(x), "r": float(r), "U": matrix_to_json(U)}
            for x, r, U in zip(self.x, self.r, self.U)
        ]

    @classmethod
    def from_json(cls, items: list) -> "ProcessAtoms":
        x = np.array([a["x"] for a in items], dtype=float)
        r = np.array([a["r"] for a in items], dtype=float)
        U = np.array([matrix_from_json(a["U"]) for a in items])
        return cls(x=x, U=U, r=r)


def sample_process(spec: GammaProcessSpec, L: int, rng: np.random.Generator) -> ProcessAtoms:
    """First ``L`` atoms of the inverse-Levy series representation.

    Locations/directions and the Exp(1) arrivals come from separate child
    streams, so a larger ``L`` extends (never reshuffles) a smaller draw.
    """
    if L < 1:
        raise ValueError("truncation L must be at least 1")
    r_atoms, r_arrivals = rng.spawn(2)
    x, U = spec.alpha_star_sampler(r_atoms, L)
    w = np.cumsum(r_arrivals.exponential(1.0, L))
    r = inverse_levy(w, spec.total_mass, spec.beta(x, U))
    return ProcessAtoms(x=np.asarray(x, dtype=float), U=np.asarray(U, dtype=complex), r=np.asarray(r))


def increment(atoms: ProcessAtoms, lo: float, hi: float) -> np.ndarray:
    """Phi([lo, hi)) = sum of r_j U_j over atoms with lo <= x_j < hi."""
    if not lo < hi:
        raise ValueError("increment needs lo < hi")
    mask = (atoms.x >= lo) & (atoms.x < hi)
    if hi >= np.pi:
        mask |= atoms.x == np.pi
    return np.einsum("l,lij->ij", atoms.r[mask], atoms.U[mask]) if mask.any() else np.zeros(
        (atoms.d, atoms.d), dtype=complex
    )


def integrability_estimate(spec: GammaProcessSpec, rng: np.random.Generator, n: int = 2000):
    """Monte Carlo estimate (and standard error) of int min(1, r) nu(dx, dU, dr).

    For each (x, U) the radial integral is (1 - exp(-beta)) / beta + E1(beta).
    """
    x, U = spec.alpha_star_sampler(rng, n)
    b = spec.beta(x, U)
    vals = spec.total_mass * (-np.expm1(-b) / b + exp1(b))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))
