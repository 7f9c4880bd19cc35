"""Bernstein polynomial mixtures with Hpd Gamma process weights.

A state ``(k, x_1..L, U_1..L, r_1..L)`` induces the spectral density

    f(omega) = sum_j Phi(I_{j,k}) b(omega / pi | j, k - j + 1),

with ``I_{j,k} = ((j - 1) pi / k, j pi / k]`` and ``Phi(A) = sum r_l U_l``
over atoms with ``x_l`` in ``A``.  The basis may be truncated to
``[xi_l, xi_r]`` of the unit interval.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gammaln, logsumexp, xlog1py, xlogy

from .gamma_process import GammaProcessSpec, ProcessAtoms, log_levy_tail


@dataclass(frozen=True)
class BasisConfig:
    """Beta basis truncation, degree bound and degree prior.

    Parameters
    ----------
    xi_l, xi_r : float
        The basis uses ``b(xi_l + x (xi_r - xi_l) | j, k - j + 1)``.
        ``xi_l=0, xi_r=1`` gives the plain Bernstein basis.
    k_max : int
        Largest admissible polynomial degree.
    degree_prior_c : float
        ``c`` in ``p(k) ∝ exp(-c k log k)``.
    """

    xi_l: float = 0.1
    xi_r: float = 0.9
    k_max: int = 500
    degree_prior_c: float = 0.01

    def __post_init__(self):
        if not (0.0 <= self.xi_l < self.xi_r <= 1.0):
            raise ValueError("need 0 <= xi_l < xi_r <= 1")
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ValueError("k_max must be a positive integer")
        if not self.degree_prior_c > 0:
            raise ValueError("degree_prior_c must be positive")

    @classmethod
    def plain(cls, k_max: int = 500, degree_prior_c: float = 0.01) -> "BasisConfig":
        return cls(xi_l=0.0, xi_r=1.0, k_max=k_max, degree_prior_c=degree_prior_c)


def log_beta_basis(x, j, k, cfg: BasisConfig):
    """Log of the (possibly truncated) Bernstein basis, broadcasting over all inputs."""
    x = np.asarray(x, dtype=float)
    j = np.asarray(j)
    k = np.asarray(k)
    if np.any(j < 1) or np.any(j > k):
        raise ValueError("basis index must satisfy 1 <= j <= k")
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("basis argument must lie in [0, 1]")
    y = cfg.xi_l + x * (cfg.xi_r - cfg.xi_l)
    log_norm = gammaln(k + 1.0) - gammaln(j * 1.0) - gammaln(k - j + 1.0)
    return log_norm + xlogy(j - 1, y) + xlog1py(k - j, -y)


def beta_basis(x, j, k, cfg: BasisConfig):
    """Basis value ``b(xi_l + x (xi_r - xi_l) | j, k - j + 1)``.

    >>> float(beta_basis(0.5, 2, 3, BasisConfig()))
    1.5
    """
    return np.exp(log_beta_basis(x, j, k, cfg))


@lru_cache(maxsize=64)
def _log_degree_prior(c: float, k_max: int) -> np.ndarray:
    k = np.arange(1, k_max + 1, dtype=float)
    logw = -c * k * np.log(k)
    out = logw - logsumexp(logw)
    out.setflags(write=False)
    return out


def log_degree_prior(cfg: BasisConfig) -> np.ndarray:
    """Normalized ``log p(k)`` for k = 1..k_max (index k - 1)."""
    return _log_degree_prior(float(cfg.degree_prior_c), int(cfg.k_max))


def bin_index(x, k: int) -> np.ndarray:
    """1-based index j with x in ((j-1) pi / k, j pi / k]; x = 0 goes to j = 1."""
    x = np.asarray(x, dtype=float)
    return np.clip(np.ceil(x * k / np.pi), 1, k).astype(int)


class BasisCache:
    """Per-degree basis matrices on a fixed frequency grid.

    ``matrix(k)[j - 1, i]`` is the basis value at ``omegas[i]``.  A chain
    owns its own cache; the least recently used degrees are evicted once
    ``max_degrees`` matrices are held.
    """

    def __init__(self, cfg: BasisConfig, omegas, max_degrees: int = 128):
        self.cfg = cfg
        self.omegas = np.asarray(omegas, dtype=float)
        if np.any(self.omegas < 0) or np.any(self.omegas > np.pi):
            raise ValueError("frequencies must lie in [0, pi]")
        self.max_degrees = max_degrees
        self._store: OrderedDict[int, np.ndarray] = OrderedDict()

    def matrix(self, k: int) -> np.ndarray:
        k = int(k)
        B = self._store.get(k)
        if B is not None:
            self._store.move_to_end(k)
            return B
        j = np.arange(1, k + 1)[:, None]
        B = beta_basis(self.omegas[None, :] / np.pi, j, k, self.cfg)
        B.setflags(write=False)
        self._store[k] = B
        if len(self._store) > self.max_degrees:
            self._store.popitem(last=False)
        return B


@dataclass(frozen=True)
class BernsteinState:
    """Degree ``k`` together with the L process atoms."""

    k: int
    atoms: ProcessAtoms

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("degree k must be a positive integer")

    def to_json(self) -> dict:
        return {"k": int(self.k), "atoms": self.atoms.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "BernsteinState":
        return cls(k=int(obj["k"]), atoms=ProcessAtoms.from_json(obj["atoms"]))


def atom_basis(x, k: int, basis: BasisCache) -> np.ndarray:
    """Rows of the basis matrix selected by the bins of the atom locations, shape (L, G)."""
    return basis.matrix(k)[bin_index(x, k) - 1]


def spectral_from_atoms(x, rU: np.ndarray, k: int, basis: BasisCache) -> np.ndarray:
    """f on the cached grid from atom locations and weighted matrices ``r_l U_l``."""
    rows = atom_basis(x, k, basis)
    return np.einsum("lg,lij->gij", rows, rU)


def eval_spectral_density(state: BernsteinState, cfg: BasisConfig, omegas, cache: BasisCache | None = None):
    """Evaluate f on a grid of frequencies in [0, pi].

    Returns
    -------
    ndarray, shape (len(omegas), d, d), complex
    """
    if state.k > cfg.k_max:
        raise ValueError("state degree exceeds k_max")
    if cache is None or cache.cfg != cfg or not np.array_equal(cache.omegas, np.asarray(omegas, dtype=float)):
        cache = BasisCache(cfg, omegas)
    rU = state.atoms.r[:, None, None] * state.atoms.U
    return spectral_from_atoms(state.atoms.x, rU, state.k, cache)


def log_prior_parts(x, U, r, spec: GammaProcessSpec) -> float:
    """Log density of the atoms (x, U, r) under the truncated series, excluding p(k).

    Returns ``-inf`` when the tail values w_l are not strictly increasing,
    which for homogeneous rates means r is not strictly decreasing.
    """
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        return -math.inf
    b = spec.beta(x, U)
    log_w = log_levy_tail(r, spec.total_mass, b)
    if np.any(np.diff(log_w) <= 0) or not np.all(np.isfinite(log_w)):
        return -math.inf
    L = r.size
    log_jac = L * math.log(spec.total_mass) - float(np.sum(np.log(r) + b * r))
    log_g = float(np.sum(spec.log_alpha_star_density(x, U)))
    return log_jac - math.exp(float(log_w[-1])) + log_g


def log_prior(state: BernsteinState, spec: GammaProcessSpec, cfg: BasisConfig) -> float:
    """Log prior density of a state.

    The atoms enter through the change of variables r_l = rho^-(w_l), whose
    increments v_l = w_l - w_{l-1} are iid Exp(1); the sum of the v_l is
    the last tail value w_L.
    """
    if not 1 <= state.k <= cfg.k_max:
        return -math.inf
    a = state.atoms
    return float(log_degree_prior(cfg)[state.k - 1]) + log_prior_parts(a.x, a.U, a.r, spec)


def bernstein_approximation(f0, k: int, d: int | None = None, epsabs: float = 1e-10, epsrel: float = 1e-10):
    """Weights ``W_j = int_{I_{j,k}} f0`` of the degree-k Bernstein approximation.

    Parameters
    ----------
    f0 : callable
        Maps a scalar frequency in [0, pi] to a d x d Hermitian matrix
        (or a scalar when d = 1).
    k : int
        Degree.

    Returns
    -------
    ndarray, shape (k, d, d), complex
    """
    if k < 1:
        raise ValueError("degree must be positive")

    def vec(w):
        m = np.atleast_2d(np.asarray(f0(w), dtype=complex))
        return np.concatenate([m.real.ravel(), m.imag.ravel()])

    probe = vec(0.5 * np.pi)
    m = probe.size // 2
    dim = int(round(math.sqrt(m))) if d is None else d
    W = np.empty((k, dim, dim), dtype=complex)
    edges = np.linspace(0.0, np.pi, k + 1)
    for j in range(k):
        val, err = integrate.quad_vec(vec, edges[j], edges[j + 1], epsabs=epsabs, epsrel=epsrel)
        if not np.all(np.isfinite(val)):
            raise ArithmeticError("quadrature failed on a basis interval")
        W[j] = (val[:m] + 1j * val[m:]).reshape(dim, dim)
    return W


def eval_weights(W, cfg: BasisConfig, omegas) -> np.ndarray:
    """Evaluate ``(1 / pi) sum_j W_j b(omega / pi | j, k - j + 1)`` for bin weights ``W_j``.

    The basis is read as a Beta density on [0, pi], so the weights
    ``W_j = int_{I_{j,k}} f0`` of :func:`bernstein_approximation` give an
    approximation of ``f0`` itself; constants are reproduced exactly for
    the plain basis.
    """
    W = np.asarray(W, dtype=complex)
    k = W.shape[0]
    omegas = np.asarray(omegas, dtype=float)
    B = beta_basis(omegas[None, :] / np.pi, np.arange(1, k + 1)[:, None], k, cfg)
    return np.einsum("jg,jab->gab", B, W) / np.pi
