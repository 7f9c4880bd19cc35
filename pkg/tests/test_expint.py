import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from matspec.expint import exp1, inverse_exp1, log_exp1, log_exp1_from_log, log_exp1_scalar


def e1_quad(x):
    """E1 by adaptive quadrature of smooth integrands.

    x <= 1: E1(x) = -gamma - log x + int_0^x (1 - e^{-s}) / s ds.
    x > 1:  E1(x) = e^{-x} int_0^inf e^{-u} / (x + u) du.
    """
    if x <= 1:
        val, _ = integrate.quad(lambda s: -math.expm1(-s) / s if s > 0 else 1.0, 0, x, epsabs=0, epsrel=1e-13)
        return -np.euler_gamma - math.log(x) + val
    val, _ = integrate.quad(lambda u: math.exp(-u) / (x + u), 0, math.inf, epsabs=0, epsrel=1e-13, limit=200)
    return math.exp(-x) * val


@pytest.mark.parametrize("x", [1e-8, 1e-3, 0.1, 0.5, 0.999, 1.0, 1.001, 2.0, 5.0, 20.0, 100.0])
def test_exp1_matches_quadrature(x):
    assert exp1(x) == pytest.approx(e1_quad(x), rel=1e-12)


def test_exp1_value_at_one():
    assert exp1(1.0) == pytest.approx(0.21938393439552062, rel=1e-14)


def test_log_exp1_large_argument_no_underflow():
    x = np.array([800.0, 1e4])
    out = log_exp1(x)
    assert np.all(np.isfinite(out))
    # E1(x) ~ exp(-x)/x (1 - 1/x + ...)
    assert out == pytest.approx(-x - np.log(x) + np.log1p(-1 / x + 2 / x**2), rel=1e-10)


def test_log_exp1_from_log_tiny_argument():
    # E1(x) ~ -gamma - log x for tiny x
    lx = -800.0
    assert log_exp1_from_log(lx) == pytest.approx(math.log(-np.euler_gamma - lx), rel=1e-12)


@given(st.floats(min_value=1e-12, max_value=600.0))
def test_scalar_path_agrees(x):
    assert log_exp1_scalar(x) == pytest.approx(float(log_exp1(x)), rel=1e-13, abs=1e-13)


@given(st.floats(min_value=-300.0, max_value=2.8))
def test_inverse_exp1_round_trip(log10_t):
    t = 10.0**log10_t
    x = inverse_exp1(t)
    assert x > 0
    assert float(exp1(x)) == pytest.approx(t, rel=1e-11)


@given(st.floats(min_value=-300.0, max_value=6.0))
def test_inverse_exp1_round_trip_log_space(log10_t):
    t = 10.0**log10_t
    lx = inverse_exp1(t, return_log=True)
    assert float(np.exp(log_exp1_from_log(lx))) == pytest.approx(t, rel=1e-11)


def test_inverse_exp1_log_output_beyond_double_range():
    # E1(x) = 1e5 needs log x near -1e5, far below the smallest double
    lx = inverse_exp1(1e5, return_log=True)
    assert float(np.exp(log_exp1_from_log(lx))) == pytest.approx(1e5, rel=1e-11)


def test_domain_errors():
    with pytest.raises(ValueError):
        exp1(0.0)
    with pytest.raises(ValueError):
        inverse_exp1(-1.0)
