import json
import math

import numpy as np
import pytest
from scipy import stats

from matspec.bernstein import BasisConfig, BernsteinState, log_degree_prior
from matspec.expint import exp1
from matspec.gamma_process import homogeneous_spec
from matspec.hpd import angle_midpoints
from matspec.likelihood import TimeSeries
from matspec.sampler import (ChainState, SamplerConfig, default_truncation, initial_state, location_step,
                             propose_angles, propose_k, propose_location, run_chain, update_k, update_location,
                             update_radial, update_weight_matrix, wrap_location)
from matspec.summaries import pointwise_summary


def prior_chain(d, L, cfg=None, beta0=1.0, n=256, seed=0, k=3):
    spec = homogeneous_spec(d, alpha_mass=2.0, beta0=beta0)
    cfg = cfg or BasisConfig()
    rng = np.random.default_rng(seed)
    _, x, phi, r = initial_state(spec, cfg, L, k, rng)
    return ChainState(spec, cfg, None, None, n, k, x, phi, r)


def batch_means_se(x, n_batches=50):
    b = np.array_split(np.asarray(x, float), n_batches)
    m = np.array([c.mean() for c in b])
    return m.std(ddof=1) / math.sqrt(n_batches)


def test_location_step_and_wrap():
    assert location_step(1, 256) == pytest.approx(np.pi / 33, rel=1e-15)
    assert np.all(np.diff(location_step(np.arange(1, 30), 256)) > 0)
    assert wrap_location(0.95 * np.pi + 0.1 * np.pi) == pytest.approx(0.05 * np.pi, abs=1e-14)
    assert wrap_location(-0.1) == pytest.approx(np.pi - 0.1)
    assert default_truncation(64) == 20 and default_truncation(27000) == 30


def test_degree_proposal_symmetric(rng):
    steps = np.array([propose_k(50, 1.0, rng) - 50 for _ in range(100_000)])
    for m in range(1, 6):
        up, down = np.sum(steps == m), np.sum(steps == -m)
        assert stats.binomtest(int(up), int(up + down)).pvalue > 1e-3


def test_location_proposal_symmetric_on_circle(rng):
    x0 = 0.05
    delta = 0.3
    props = np.array([propose_location(x0, delta, rng) for _ in range(100_000)])
    disp = (props - x0 + np.pi / 2) % np.pi - np.pi / 2
    assert np.all(np.abs(disp) <= delta + 1e-12)
    assert np.all((props >= 0) & (props < np.pi))
    assert stats.binomtest(int(np.sum(disp > 0)), disp.size).pvalue > 1e-3
    assert stats.kstest(disp, stats.uniform(-delta, 2 * delta).cdf).pvalue > 1e-3


def test_angle_proposal_box_flag(rng):
    phi = angle_midpoints(2)
    _, inside = propose_angles(phi, 0.01, rng)
    assert inside
    _, inside = propose_angles(np.full(3, 1e-9), 0.5, rng)
    assert not inside


def test_degree_out_of_range_keeps_state():
    chain = prior_chain(2, 3, cfg=BasisConfig(k_max=1), k=1)
    rng = np.random.default_rng(1)
    for _ in range(200):
        update_k(chain, 5.0, rng)
        assert chain.k == 1


def test_degree_marginal_under_prior():
    cfg = BasisConfig(k_max=20, degree_prior_c=0.5)
    chain = prior_chain(2, 2, cfg=cfg, k=10)
    rng = np.random.default_rng(2)
    ks = []
    for t in range(200_000):
        update_k(chain, 1.0, rng)
        if t % 10 == 0:
            ks.append(chain.k)
    obs = np.bincount(ks, minlength=21)[1:]
    exp = np.exp(log_degree_prior(cfg)) * len(ks)
    keep = exp >= 5
    obs_k = np.append(obs[keep], obs[~keep].sum())
    exp_k = np.append(exp[keep], exp[~keep].sum())
    assert stats.chisquare(obs_k, exp_k).pvalue > 0.01


def test_radial_update_targets_series_law():
    chain = prior_chain(1, 1, beta0=1.0)
    rng = np.random.default_rng(3)
    C = chain.spec.total_mass
    w = []
    for t in range(100_000):
        update_radial(chain, 0, 1.5, rng)
        if t % 20 == 0:
            w.append(C * exp1(chain.r[0]))
    assert stats.kstest(w, "expon").pvalue > 0.01


def test_location_update_uniform_under_prior():
    chain = prior_chain(1, 3)
    rng = np.random.default_rng(4)
    xs = []
    for t in range(30_000):
        for l in range(3):
            update_location(chain, l, float(location_step(l + 1, 256)), rng)
        if t % 30 == 0:
            xs.extend(chain.x)
    assert stats.kstest(np.array(xs) / np.pi, "uniform").pvalue > 0.01


def test_weight_update_uniform_on_unit_trace_matrices():
    # for d = 2 the unit-trace Hpd matrices form a ball in which U_11 = (1 + z) / 2
    # has density (3/4)(1 - z^2) and E tr U^2 = 4/5
    chain = prior_chain(2, 1)
    rng = np.random.default_rng(5)
    tr2, u11 = [], []
    for t in range(150_000):
        update_weight_matrix(chain, 0, 0.5, rng)
        if t % 10 == 0:
            U = chain.U[0]
            tr2.append(np.trace(U @ U).real)
            u11.append(U[0, 0].real)
    tr2 = np.array(tr2)
    assert abs(tr2.mean() - 0.8) < 4 * batch_means_se(tr2)
    z = 2 * np.array(u11[::5]) - 1
    cdf = lambda s: 0.5 + 0.75 * s - 0.25 * s**3  # noqa: E731
    assert stats.kstest(z, cdf).pvalue > 0.01


def test_weight_update_noop_for_scalars_and_rejects_outside_box():
    chain = prior_chain(1, 2)
    assert update_weight_matrix(chain, 0, 0.5, np.random.default_rng(0)) is False
    chain = prior_chain(2, 2)
    chain.phi[0] = np.full(3, 1e-9)
    before = chain.U[0].copy()
    rng = np.random.default_rng(6)
    # half-widths of 50 interval lengths put every proposal outside the box
    assert not any(update_weight_matrix(chain, 0, 50.0, rng) for _ in range(20))
    assert np.array_equal(chain.U[0], before)


def _small_run(seed, **kw):
    rng = np.random.default_rng(99)
    Z = rng.standard_normal((64, 2))
    scfg = SamplerConfig(total_iterations=300, burn_in=100, thin=4, L=6, init_k=20, **kw)
    spec = homogeneous_spec(2)
    return run_chain(TimeSeries(Z), spec, BasisConfig(k_max=60), scfg, np.random.default_rng(seed))


def test_chain_is_deterministic():
    a, b = _small_run(7), _small_run(7)
    for name in ("k", "x", "r", "U", "spectra", "log_posterior"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = _small_run(8)
    assert not np.array_equal(a.r, c.r)


def test_draws_shape_psd_and_finite_trace():
    dr = _small_run(1)
    assert len(dr) == 50 and dr.spectra.shape == (50, 31, 2, 2)
    assert np.all(np.isfinite(dr.log_posterior))
    eig = np.linalg.eigvalsh(dr.spectra)
    assert eig.min() >= -1e-12 * np.abs(dr.spectra).max()
    for s in dr.states()[:5]:
        assert np.all(np.diff(s.atoms.r) < 0)
    assert 0 <= dr.acceptance["k"] <= 1 and len(dr.acceptance["r"]) == 6
    assert dr.config["L"] == 6


def test_checkpoint_file(tmp_path):
    rng = np.random.default_rng(0)
    p = tmp_path / "ck.jsonl"
    scfg = SamplerConfig(total_iterations=200, burn_in=50, thin=5, L=4, init_k=10, checkpoint_every=50)
    run_chain(TimeSeries(rng.standard_normal((40, 2))), homogeneous_spec(2), BasisConfig(k_max=30), scfg, rng,
              checkpoint_path=p)
    lines = p.read_text().splitlines()
    assert len(lines) == 4
    rec = json.loads(lines[-1])
    assert rec["iteration"] == 200
    assert BernsteinState.from_json(rec["state"]).k >= 1


def test_custom_grid_and_startup_errors():
    rng = np.random.default_rng(0)
    ts = TimeSeries(rng.standard_normal((40, 2)))
    scfg = SamplerConfig(total_iterations=20, burn_in=10, thin=1, L=3, init_k=5)
    grid = np.linspace(0, np.pi, 9)
    dr = run_chain(ts, homogeneous_spec(2), BasisConfig(k_max=30), scfg, rng, grid=grid)
    assert dr.spectra.shape == (10, 9, 2, 2) and np.array_equal(dr.omegas, grid)
    with pytest.raises(RuntimeError):
        run_chain(ts, homogeneous_spec(2), BasisConfig(k_max=30), scfg, rng, log_likelihood=lambda f: -math.inf)
    with pytest.raises(ValueError):
        run_chain(ts, homogeneous_spec(3), BasisConfig(k_max=30), scfg, rng)
    with pytest.raises(ValueError):
        run_chain(None, homogeneous_spec(2), BasisConfig(k_max=30), scfg, rng, prior_only=True)


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(total_iterations=10, burn_in=10)
    with pytest.raises(ValueError):
        SamplerConfig(thin=0)
    d = SamplerConfig.desk()
    assert (d.total_iterations, d.burn_in, d.thin, d.n_draws) == (8000, 3000, 5, 1000)


def test_adaptation_reaches_target_band():
    # prior-only chain, d = 2, L = 1: the radial target is smooth in log r
    scfg = SamplerConfig(total_iterations=30_000, burn_in=25_000, thin=10, L=1, init_radial_scale=5.0,
                         init_angle_scale=0.9)
    dr = run_chain(None, homogeneous_spec(2, beta0=1.0), BasisConfig(), scfg, np.random.default_rng(11),
                   prior_only=True, n=256)
    assert 0.34 <= dr.acceptance["r"][0] <= 0.54
    assert 0.34 <= dr.acceptance["U"][0] <= 0.54
    assert dr.step_sizes["radial"][0] < 5.0


@pytest.mark.slow
def test_white_noise_truth_inside_pointwise_band():
    rng = np.random.default_rng(2024)
    sigma2 = 1.0
    ts = TimeSeries(rng.standard_normal(256)).centered()[0]
    dr = run_chain(ts, homogeneous_spec(1), BasisConfig(), SamplerConfig.desk(), np.random.default_rng(5))
    summ = pointwise_summary(dr.spectra, dr.omegas, quantiles=(0.05, 0.95))
    truth = sigma2 / (2 * np.pi)
    inside = (summ.lower[:, 0] <= truth) & (truth <= summ.upper[:, 0])
    assert inside.mean() >= 0.8
