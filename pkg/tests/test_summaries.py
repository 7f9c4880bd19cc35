import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matspec.summaries import (MAD_FLOOR, error_metrics, h_inverse, h_labels, h_plain, h_transform,
                               pointwise_summary, read_summary_median, summarize, sup_statistics, uniform_region)

from conftest import random_hpd


def random_draws(rng, M=40, G=7, d=2):
    return np.stack([np.stack([random_hpd(rng, d) for _ in range(G)]) for _ in range(M)])


def test_identical_draws_collapse(rng):
    one = random_draws(rng, 1)[0]
    S = np.repeat(one[None], 12, axis=0)
    s = summarize(S)
    assert np.allclose(s.median, one, atol=1e-14)
    assert np.allclose(s.lower, s.upper)
    assert np.allclose(s.uniform_lower, h_plain(one), rtol=1e-10)
    assert np.allclose(s.uniform_upper, h_plain(one), rtol=1e-10)


def test_two_draw_median_is_midpoint(rng):
    A = random_draws(rng, 1)[0]
    B = A + 0.5 * np.eye(2)[None]
    s = pointwise_summary(np.stack([A, B]))
    assert np.allclose(s.median, (A + B) / 2, atol=1e-14)


def test_quantile_band_ordered(rng):
    s = pointwise_summary(random_draws(rng), quantiles=(0.05, 0.95))
    assert np.all(s.lower <= s.upper)
    med = h_plain(s.median)
    assert np.all(s.lower <= med + 1e-14) and np.all(med <= s.upper + 1e-14)


def test_median_permutation_invariant(rng):
    S = random_draws(rng)
    perm = rng.permutation(len(S))
    a, b = pointwise_summary(S), pointwise_summary(S[perm])
    assert np.array_equal(a.median, b.median) and np.array_equal(a.lower, b.lower)


def test_empty_draws_rejected():
    with pytest.raises(ValueError):
        pointwise_summary(np.zeros((0, 3, 2, 2)))


@pytest.mark.parametrize("M", [10, 37, 100])
def test_uniform_region_recount(rng, M):
    S = random_draws(rng, M)
    s = uniform_region(S, 0.9)
    h = h_transform(S)
    lo = s.uniform_lower.copy()
    hi = s.uniform_upper.copy()
    lo[..., :2], hi[..., :2] = np.log(lo[..., :2]), np.log(hi[..., :2])
    inside = np.all((h >= lo - 1e-12) & (h <= hi + 1e-12), axis=(1, 2))
    assert inside.sum() >= math.ceil(0.9 * M)
    sup = sup_statistics(S)
    assert np.sum(sup <= s.c_level) >= math.ceil(0.9 * M)
    assert np.sum(sup < s.c_level) < math.ceil(0.9 * M)


def test_uniform_constant_scalar_draws(rng):
    c = np.exp(rng.standard_normal(50))
    S = np.broadcast_to(c[:, None, None, None], (50, 4, 1, 1)).astype(complex)
    x = np.log(c)
    med = np.median(x)
    mad = np.median(np.abs(x - med))
    stat = np.sort(np.abs(x - med) / mad)
    s = uniform_region(S, 0.9)
    assert s.c_level == pytest.approx(stat[math.ceil(0.9 * 50) - 1], rel=1e-12)
    assert np.allclose(s.uniform_lower[:, 0], np.exp(med - s.c_level * mad))


def test_uniform_level_validation(rng):
    with pytest.raises(ValueError):
        uniform_region(random_draws(rng, 5), 1.0)
    S = random_draws(rng, 5)
    S[2, 1, 0, 0] = -1.0
    with pytest.raises(ValueError):
        uniform_region(S)


def test_mad_floor_applies(rng):
    S = random_draws(rng, 6)
    S[:, :, 0, 1] = S[0, :, 0, 1]
    S[:, :, 1, 0] = np.conj(S[0, :, 0, 1])
    assert np.all(np.isfinite(sup_statistics(S)))
    assert MAD_FLOOR == 1e-12


def test_h_round_trip_and_labels(rng):
    for d in (1, 2, 3):
        A = np.stack([random_hpd(rng, d) for _ in range(5)])
        h = h_transform(A)
        assert h.shape == (5, d * d)
        assert np.allclose(h_inverse(h), A, atol=1e-12)
    assert h_labels(2) == [("f11", "re"), ("f22", "re"), ("f12", "re"), ("f12", "im")]
    with pytest.raises(ValueError):
        h_transform(np.diag([1.0, 0.0]))
    with pytest.raises(ValueError):
        h_inverse(np.zeros(3))


def test_error_metric_examples(rng):
    A = random_draws(rng, 1)[0]
    assert error_metrics(A, A) == (0.0, 0.0)
    f = np.full(9, 2.0)
    l1, l2 = error_metrics(f + 0.3, f)
    assert l1 == pytest.approx(0.3) and l2 == pytest.approx(0.3)
    B = random_draws(rng, 1)[0]
    direct = [math.sqrt(sum(abs(A[g, i, j] - B[g, i, j]) ** 2 for i in range(2) for j in range(2)))
              for g in range(A.shape[0])]
    l1, l2 = error_metrics(A, B)
    assert l1 == pytest.approx(sum(direct) / len(direct), abs=1e-12)
    assert l2 == pytest.approx(math.sqrt(sum(x * x for x in direct) / len(direct)), abs=1e-12)
    with pytest.raises(ValueError):
        error_metrics(A, B[:-1])


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(1, 20))
def test_l1_below_l2(seed, G):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((G, 2, 2)) + 1j * rng.standard_normal((G, 2, 2))
    B = rng.standard_normal((G, 2, 2))
    l1, l2 = error_metrics(A, B)
    assert l1 <= l2 + 1e-12


def test_summary_csv_round_trip(rng, tmp_path):
    S = random_draws(rng, 20, G=5, d=3)
    w = np.linspace(0.1, 3.0, 5)
    s = summarize(S, w)
    p = tmp_path / "s.csv"
    s.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "omega,component_id,re_or_im,median,q05,q95,uniform_lo,uniform_hi"
    assert len(lines) == 1 + 5 * 9
    om, med = read_summary_median(p)
    assert np.array_equal(om, w)
    assert np.array_equal(med, s.median)
