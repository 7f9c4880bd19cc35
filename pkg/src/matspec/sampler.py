"""Adaptive Metropolis-within-Gibbs sampler for the Bernstein-Hpd-Gamma posterior.

One iteration updates, in this order, the degree k, the radii r_1..r_L,
the locations x_1..x_L and the weight matrices U_1..U_L (through their
hyperspherical angles).  Radial and angular step sizes are tuned in
batches during burn-in toward a target acceptance rate and frozen after.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bernstein import BasisCache, BasisConfig, BernsteinState, bin_index, log_degree_prior
from .expint import log_exp1_scalar
from .gamma_process import GammaProcessSpec, ProcessAtoms, inverse_levy
from .hpd import (_angle_upper_bounds, angle_midpoints, angles_to_unit_hpd, log_jacobian_angles, n_angles,
                  unit_hpd_and_log_jacobian)
from .likelihood import TimeSeries, WhittleEvaluator, fourier_coefficients, fourier_frequencies


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, truncation and proposal tuning.

    ``L=None`` selects ``max(20, ceil(n^{1/3}))`` from the data length.
    ``adapt_cap`` bounds the per-batch change of a log step size; the
    change in batch i is ``min(adapt_cap, i^{-1/2})``.
    """

    total_iterations: int = 80000
    burn_in: int = 30000
    thin: int = 5
    L: int | None = None
    target_acceptance: float = 0.44
    batch_size: int = 50
    adapt_cap: float = 0.01
    cauchy_scale: float = 1.0
    init_k: int = 100
    init_radial_scale: float = 0.5
    init_angle_scale: float = 0.1
    init_radial: str = "exp"
    checkpoint_every: int = 0

    def __post_init__(self):
        if not 0 <= self.burn_in < self.total_iterations:
            raise ValueError("need 0 <= burn_in < total_iterations")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if self.L is not None and self.L < 1:
            raise ValueError("L must be positive")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target acceptance must lie in (0, 1)")
        if self.batch_size < 1 or self.cauchy_scale <= 0 or self.adapt_cap <= 0:
            raise ValueError("batch size, Cauchy scale and adaptation cap must be positive")
        if self.init_k < 1 or self.init_radial_scale <= 0 or self.init_angle_scale <= 0:
            raise ValueError("initial degree and step sizes must be positive")

    @classmethod
    def desk(cls, **overrides) -> "SamplerConfig":
        """Short profile (8000 / 3000 / 5) for quick runs and CI."""
        base = dict(total_iterations=8000, burn_in=3000, thin=5)
        base.update(overrides)
        return cls(**base)

    @property
    def n_draws(self) -> int:
        return (self.total_iterations - self.burn_in) // self.thin


def default_truncation(n: int) -> int:
    return max(20, math.ceil(n ** (1.0 / 3.0) - 1e-12))


def location_step(l, n: int):
    """Half-width pi l / (l + 2 sqrt(n)) of the uniform location increment (l is 1-based)."""
    l = np.asarray(l, dtype=float)
    return np.pi * l / (l + 2.0 * math.sqrt(n))


def propose_k(k: int, scale: float, rng: np.random.Generator) -> int:
    """k plus a rounded Cauchy(0, scale) increment."""
    step = scale * rng.standard_cauchy()
    if not abs(step) < 1e15:
        return -1
    return int(k + round(step))


def wrap_location(x):
    """Map onto [0, pi) by circular wrap-around."""
    return np.mod(x, np.pi)


def propose_location(x: float, delta: float, rng: np.random.Generator) -> float:
    return float(wrap_location(x + rng.uniform(-delta, delta)))


def propose_angles(phi: np.ndarray, scale: float, rng: np.random.Generator):
    """Uniform increments of half-width ``a_j * scale``; returns (phi', inside_box)."""
    ub = _angle_upper_bounds(int(round(math.sqrt(phi.size + 1))))
    prop = phi + ub * scale * rng.uniform(-1.0, 1.0, phi.size)
    return prop, bool((prop > 0).all() and (prop < ub).all())


@dataclass
class PosteriorDraws:
    """Thinned post-burn-in draws together with spectra on ``omegas``."""

    k: np.ndarray
    x: np.ndarray
    r: np.ndarray
    U: np.ndarray
    spectra: np.ndarray | None
    omegas: np.ndarray
    acceptance: dict
    log_posterior: np.ndarray
    step_sizes: dict
    config: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.k)

    def state(self, i: int) -> BernsteinState:
        return BernsteinState(k=int(self.k[i]), atoms=ProcessAtoms(x=self.x[i], U=self.U[i], r=self.r[i]))

    def states(self) -> list:
        return [self.state(i) for i in range(len(self))]


class ChainState:
    """Mutable state of a single chain together with cached posterior pieces.

    Parameters
    ----------
    log_likelihood : callable or None
        Maps f on the likelihood grid, shape (G, d, d), to a log-likelihood.
        ``None`` runs the chain on the prior alone.
    """

    def __init__(self, spec: GammaProcessSpec, cfg: BasisConfig, basis: BasisCache | None,
                 log_likelihood, n: int, k: int, x, phi, r):
        self.spec = spec
        self.cfg = cfg
        self.basis = basis
        self.log_likelihood = log_likelihood
        self.n = n
        self.d = spec.d
        self.log_pk = log_degree_prior(cfg)
        self.log_c = math.log(spec.total_mass)
        self.k = int(k)
        self.x = np.array(x, dtype=float)
        self.phi = np.array(phi, dtype=float).reshape(len(self.x), n_angles(self.d))
        self.r = np.array(r, dtype=float)
        self.L = len(self.x)
        self.U = np.array([angles_to_unit_hpd(p) for p in self.phi])
        self.log_jac = np.array([log_jacobian_angles(p) for p in self.phi])
        self.w = np.empty(self.L)  # log tail values
        self.atom_term = np.empty(self.L)
        for l in range(self.L):
            self.w[l], self.atom_term[l] = self.atom_eval(self.x[l], self.U[l], self.r[l])
        self.rows = None
        self.f = None
        self.loglik = 0.0
        if self.log_likelihood is not None:
            self.rows = self.basis.matrix(self.k)[bin_index(self.x, self.k) - 1]
            self.f = self.spectral(self.rows, self.r, self.U)
            self.loglik = float(self.log_likelihood(self.f))

    @property
    def homogeneous(self) -> bool:
        return self.spec.homogeneous_beta is not None and self.spec.log_alpha_star_constant is not None

    # -- posterior pieces -------------------------------------------------
    def atom_eval(self, x: float, U: np.ndarray, r: float):
        """Log tail value log w and the log-density term -log r - beta r + log g* of one atom."""
        if not r > 0:
            return math.nan, -math.inf
        spec = self.spec
        if spec.homogeneous_beta is not None:
            b = spec.homogeneous_beta
        else:
            b = float(spec.beta(np.array([x]), U[None])[0])
        if spec.log_alpha_star_constant is not None:
            lg = spec.log_alpha_star_constant
        else:
            lg = float(spec.log_alpha_star_density(np.array([x]), U[None])[0])
        return self.log_c + log_exp1_scalar(b * r), -math.log(r) - b * r + lg

    def ordered_at(self, l: int, w: float) -> bool:
        """Whether log tail value ``w`` at position l keeps the tail values increasing."""
        if not w == w:
            return False
        if l > 0 and not w > self.w[l - 1]:
            return False
        if l < self.L - 1 and not w < self.w[l + 1]:
            return False
        return True

    def log_prior(self) -> float:
        if np.any(np.diff(self.w) <= 0):
            return -math.inf
        return float(self.log_pk[self.k - 1] + self.L * self.log_c + self.atom_term.sum() - math.exp(self.w[-1]))

    def log_posterior(self) -> float:
        return self.log_prior() + self.loglik

    def spectral(self, rows, r, U) -> np.ndarray:
        rU = (r[:, None, None] * U).reshape(self.L, -1)
        return (rows.T @ rU).reshape(-1, self.d, self.d)

    def to_state(self) -> BernsteinState:
        return BernsteinState(k=self.k, atoms=ProcessAtoms(x=self.x.copy(), U=self.U.copy(), r=self.r.copy()))

    def _lik(self, rows, r, U):
        if self.log_likelihood is None:
            return None, 0.0
        f = self.spectral(rows, r, U)
        return f, float(self.log_likelihood(f))


def _accept(log_ratio: float, rng: np.random.Generator) -> bool:
    # one uniform is consumed per call so the stream layout does not depend on the ratio
    u = rng.random()
    if not log_ratio == log_ratio:  # NaN
        return False
    return log_ratio >= 0 or u < math.exp(log_ratio)


def update_k(chain: ChainState, scale: float, rng: np.random.Generator) -> bool:
    """Random-walk update of the degree with discretized Cauchy increments."""
    kp = propose_k(chain.k, scale, rng)
    if not 1 <= kp <= chain.cfg.k_max:
        rng.random()
        return False
    rows = None
    ll = 0.0
    if chain.log_likelihood is not None:
        rows = chain.basis.matrix(kp)[bin_index(chain.x, kp) - 1]
        f, ll = chain._lik(rows, chain.r, chain.U)
    log_ratio = chain.log_pk[kp - 1] - chain.log_pk[chain.k - 1] + ll - chain.loglik
    if _accept(log_ratio, rng):
        chain.k = kp
        if rows is not None:
            chain.rows, chain.f, chain.loglik = rows, f, ll
        return True
    return False


def update_radial(chain: ChainState, l: int, sigma: float, rng: np.random.Generator) -> bool:
    """Log-normal random-walk update of r_l, including the log r'/r proposal correction."""
    r_old = chain.r[l]
    r_new = r_old * math.exp(sigma * rng.standard_normal())
    w_new, term_new = chain.atom_eval(chain.x[l], chain.U[l], r_new)
    if not chain.ordered_at(l, w_new):
        rng.random()
        return False
    r = chain.r.copy()
    r[l] = r_new
    f = None
    ll = 0.0
    if chain.log_likelihood is not None:
        f, ll = chain._lik(chain.rows, r, chain.U)
    d_w_last = (math.exp(w_new) - math.exp(chain.w[l])) if l == chain.L - 1 else 0.0
    log_ratio = (term_new - chain.atom_term[l]) - d_w_last + (ll - chain.loglik)
    log_ratio += math.log(r_new) - math.log(r_old)
    if _accept(log_ratio, rng):
        chain.r = r
        chain.w[l], chain.atom_term[l] = w_new, term_new
        if f is not None:
            chain.f, chain.loglik = f, ll
        return True
    return False


def update_location(chain: ChainState, l: int, delta: float, rng: np.random.Generator) -> bool:
    """Uniform random-walk update of x_l with circular wrap-around on [0, pi)."""
    x_new = propose_location(chain.x[l], delta, rng)
    if chain.homogeneous:
        w_new, term_new = chain.w[l], chain.atom_term[l]
    else:
        w_new, term_new = chain.atom_eval(x_new, chain.U[l], chain.r[l])
    if not chain.ordered_at(l, w_new):
        rng.random()
        return False
    rows = None
    f = None
    ll = 0.0
    if chain.log_likelihood is not None:
        rows = chain.rows.copy()
        rows[l] = chain.basis.matrix(chain.k)[bin_index(x_new, chain.k) - 1]
        f, ll = chain._lik(rows, chain.r, chain.U)
    d_w_last = (math.exp(w_new) - math.exp(chain.w[l])) if l == chain.L - 1 else 0.0
    log_ratio = (term_new - chain.atom_term[l]) - d_w_last + (ll - chain.loglik)
    if _accept(log_ratio, rng):
        chain.x[l] = x_new
        chain.w[l], chain.atom_term[l] = w_new, term_new
        if rows is not None:
            chain.rows, chain.f, chain.loglik = rows, f, ll
        return True
    return False


def update_weight_matrix(chain: ChainState, l: int, scale: float, rng: np.random.Generator) -> bool:
    """Blockwise uniform random-walk update of the angles of U_l.

    Proposals outside the angle box are rejected.  The ratio carries the
    log-Jacobian difference because the prior density is defined on U.
    """
    if chain.d == 1:
        return False
    phi_new, inside = propose_angles(chain.phi[l], scale, rng)
    if not inside:
        rng.random()
        return False
    U_new, lj_new = unit_hpd_and_log_jacobian(phi_new, chain.d)
    if chain.homogeneous:
        w_new, term_new = chain.w[l], chain.atom_term[l]
    else:
        w_new, term_new = chain.atom_eval(chain.x[l], U_new, chain.r[l])
    if not chain.ordered_at(l, w_new):
        rng.random()
        return False
    U = chain.U.copy()
    U[l] = U_new
    f = None
    ll = 0.0
    if chain.log_likelihood is not None:
        f, ll = chain._lik(chain.rows, chain.r, U)
    d_w_last = (math.exp(w_new) - math.exp(chain.w[l])) if l == chain.L - 1 else 0.0
    log_ratio = (term_new - chain.atom_term[l]) - d_w_last + (lj_new - chain.log_jac[l]) + (ll - chain.loglik)
    if _accept(log_ratio, rng):
        chain.U = U
        chain.phi[l] = phi_new
        chain.log_jac[l] = lj_new
        chain.w[l], chain.atom_term[l] = w_new, term_new
        if f is not None:
            chain.f, chain.loglik = f, ll
        return True
    return False


def initial_state(spec: GammaProcessSpec, cfg: BasisConfig, L: int, init_k: int, rng: np.random.Generator,
                  radial: str = "exp"):
    """k = min(init_k, k_max), uniform locations and midpoint angles.

    Radii are iid Exp(1) sorted in decreasing order (``radial="exp"``) or
    the first L terms of the inverse-Levy series (``radial="series"``).
    """
    d = spec.d
    k = min(init_k, cfg.k_max)
    x = rng.uniform(0.0, np.pi, L)
    phi = np.tile(angle_midpoints(d), (L, 1))
    if radial == "exp":
        r = np.sort(rng.exponential(1.0, L))[::-1].copy()
    elif radial == "series":
        U = np.array([angles_to_unit_hpd(p) for p in phi])
        w = np.cumsum(rng.exponential(1.0, L))
        log_r = inverse_levy(w, spec.total_mass, spec.beta(x, U), return_log=True)
        r = np.exp(np.maximum(log_r, math.log(np.finfo(float).tiny)))
    else:
        raise ValueError("radial initialisation must be 'exp' or 'series'")
    return k, x, phi, r


def run_chain(ts: TimeSeries | None, spec: GammaProcessSpec, cfg: BasisConfig, scfg: SamplerConfig,
              rng: np.random.Generator, *, grid=None, prior_only: bool = False, log_likelihood=None,
              checkpoint_path=None, n: int | None = None) -> PosteriorDraws:
    """Run one chain and return the thinned post-burn-in draws.

    Parameters
    ----------
    ts : TimeSeries or None
        Centered data.  May be None for prior-only runs, in which case
        ``n`` (used for L and the location steps) must be given.
    grid : array_like, optional
        Frequencies at which stored spectra are evaluated; defaults to the
        Fourier frequencies omega_1..omega_N.
    prior_only : bool
        Replace the likelihood by the constant 0.
    log_likelihood : callable, optional
        Custom likelihood of f on the Fourier frequencies (testing hook).
    checkpoint_path : path, optional
        JSON lines file receiving the state every ``scfg.checkpoint_every``
        iterations.
    """
    if ts is not None:
        n = ts.n
        if ts.d != spec.d:
            raise ValueError("data dimension does not match the process dimension")
    if n is None:
        raise ValueError("n is required when no data are given")
    L = scfg.L or default_truncation(n)
    lik_grid = fourier_frequencies(n)
    if prior_only:
        lik = None
    elif log_likelihood is not None:
        lik = log_likelihood
    else:
        if ts is None:
            raise ValueError("data are required unless prior_only is set")
        lik = WhittleEvaluator(fourier_coefficients(ts))

    basis = BasisCache(cfg, lik_grid) if lik is not None else None
    out_grid = lik_grid if grid is None else np.asarray(grid, dtype=float)
    same_grid = grid is None and basis is not None
    out_basis = basis if same_grid else BasisCache(cfg, out_grid)

    k0, x0, phi0, r0 = initial_state(spec, cfg, L, scfg.init_k, rng, scfg.init_radial)
    chain = ChainState(spec, cfg, basis, lik, n, k0, x0, phi0, r0)
    lp = chain.log_posterior()
    if not math.isfinite(lp):
        raise RuntimeError("log posterior is not finite at the initial state")

    d = spec.d
    deltas = location_step(np.arange(1, L + 1), n)
    log_sig_r = np.full(L, math.log(scfg.init_radial_scale))
    log_sig_u = np.full(L, math.log(scfg.init_angle_scale))
    batch_r = np.zeros(L)
    batch_u = np.zeros(L)
    acc = {"k": 0, "r": np.zeros(L), "x": np.zeros(L), "U": np.zeros(L)}
    n_post = scfg.total_iterations - scfg.burn_in
    M = scfg.n_draws
    ks = np.empty(M, dtype=int)
    xs = np.empty((M, L))
    rs = np.empty((M, L))
    Us = np.empty((M, L, d, d), dtype=complex)
    spectra = np.empty((M, len(out_grid), d, d), dtype=complex)
    trace = np.empty(scfg.total_iterations)
    ckpt = open(checkpoint_path, "w") if checkpoint_path and scfg.checkpoint_every else None
    m = 0
    try:
        for t in range(1, scfg.total_iterations + 1):
            post = t > scfg.burn_in
            a = update_k(chain, scfg.cauchy_scale, rng)
            if post:
                acc["k"] += a
            for l in range(L):
                a = update_radial(chain, l, math.exp(log_sig_r[l]), rng)
                batch_r[l] += a
                if post:
                    acc["r"][l] += a
            for l in range(L):
                a = update_location(chain, l, float(deltas[l]), rng)
                if post:
                    acc["x"][l] += a
            if d > 1:
                for l in range(L):
                    a = update_weight_matrix(chain, l, math.exp(log_sig_u[l]), rng)
                    batch_u[l] += a
                    if post:
                        acc["U"][l] += a
            if not post and t % scfg.batch_size == 0:
                step = min(scfg.adapt_cap, (t // scfg.batch_size) ** -0.5)
                tgt = scfg.target_acceptance * scfg.batch_size
                log_sig_r += np.where(batch_r > tgt, step, -step)
                log_sig_u += np.where(batch_u > tgt, step, -step)
                batch_r[:] = 0
                batch_u[:] = 0
            trace[t - 1] = chain.log_posterior()
            if post and (t - scfg.burn_in) % scfg.thin == 0 and m < M:
                ks[m], xs[m], rs[m], Us[m] = chain.k, chain.x, chain.r, chain.U
                if same_grid:
                    spectra[m] = chain.f
                else:
                    rows = out_basis.matrix(chain.k)[bin_index(chain.x, chain.k) - 1]
                    spectra[m] = chain.spectral(rows, chain.r, chain.U)
                m += 1
            if ckpt is not None and t % scfg.checkpoint_every == 0:
                ckpt.write(json.dumps({"iteration": t, "log_posterior": trace[t - 1],
                                       "state": chain.to_state().to_json()}) + "\n")
    finally:
        if ckpt is not None:
            ckpt.close()

    denom = max(n_post, 1)
    acceptance = {
        "k": acc["k"] / denom,
        "r": (acc["r"] / denom).tolist(),
        "x": (acc["x"] / denom).tolist(),
        "U": (acc["U"] / denom).tolist() if d > 1 else [],
    }
    acceptance["r_mean"] = float(np.mean(acceptance["r"]))
    acceptance["x_mean"] = float(np.mean(acceptance["x"]))
    acceptance["U_mean"] = float(np.mean(acceptance["U"])) if d > 1 else None
    steps = {"radial": np.exp(log_sig_r).tolist(), "angle": np.exp(log_sig_u).tolist() if d > 1 else []}
    conf = asdict(scfg)
    conf["L"] = L
    return PosteriorDraws(k=ks, x=xs, r=rs, U=Us, spectra=spectra, omegas=out_grid, acceptance=acceptance,
                          log_posterior=trace, step_sizes=steps, config=conf)
