import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from matspec.hpd import (DomainError, angle_midpoints, angle_upper_bounds, angles_to_unit_hpd, check_hpsd, hpd_sqrt,
                         log_jacobian_angles, matrix_from_json, matrix_to_json, norms_and_eigs,
                         sample_uniform_unit_hpd, sample_uniform_unit_hpd_rejection, unit_hpd_and_log_jacobian,
                         unit_hpd_to_angles, unit_sphere_volume, unit_trace_chart)

from conftest import random_hpd


def random_angles(rng, d):
    ub = angle_upper_bounds(d)
    return ub * rng.uniform(0.02, 0.98, ub.size)


def _central(phi, h):
    m = phi.size
    J = np.empty((m, m))
    for i in range(m):
        e = np.zeros(m)
        e[i] = h
        J[:, i] = (unit_trace_chart(angles_to_unit_hpd(phi + e)) - unit_trace_chart(angles_to_unit_hpd(phi - e))) / (2 * h)
    return J


def fd_log_jacobian(phi, h=1e-4):
    """log |det| of the Richardson-extrapolated central-difference Jacobian of phi -> chart(U)."""
    J = (4 * _central(phi, h / 2) - _central(phi, h)) / 3
    return np.linalg.slogdet(J)[1]


def test_d1_is_trivial():
    assert np.allclose(angles_to_unit_hpd(np.empty(0)), [[1.0]])
    assert unit_hpd_to_angles(np.array([[1.0]])).size == 0
    assert log_jacobian_angles(np.empty(0)) == 0.0


def test_midpoints_give_unit_trace_psd():
    U = angles_to_unit_hpd(angle_midpoints(2))
    assert U.trace().real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(U).min() >= -1e-12


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_round_trip(d, rng):
    for _ in range(100):
        U = sample_uniform_unit_hpd(d, rng)
        back = angles_to_unit_hpd(unit_hpd_to_angles(U))
        assert np.max(np.abs(back - U)) < 1e-10
        if d > 1:
            # box-uniform angles often give numerically singular U for d >= 3; the
            # inverse needs a Cholesky factor and inherits its conditioning
            phi = random_angles(rng, d)
            V = angles_to_unit_hpd(phi)
            lam = np.linalg.eigvalsh(V).min()
            if lam > 1e-8:
                assert np.max(np.abs(angles_to_unit_hpd(unit_hpd_to_angles(V)) - V)) < 1e-10
            if lam > 1e-2:
                assert np.max(np.abs(unit_hpd_to_angles(V) - phi)) < 1e-10


def test_isotropic_round_trip():
    for d in (2, 3):
        U = np.eye(d) / d
        assert np.allclose(angles_to_unit_hpd(unit_hpd_to_angles(U)), U, atol=1e-12)


@pytest.mark.parametrize("d", [2, 3])
def test_log_jacobian_matches_finite_differences(d, rng):
    # random points: angles of uniformly distributed U, plus the box midpoint
    phis = [angle_midpoints(d)] + [unit_hpd_to_angles(sample_uniform_unit_hpd(d, rng)) for _ in range(100)]
    for phi in phis:
        exact = log_jacobian_angles(phi)
        assert exact == pytest.approx(fd_log_jacobian(phi), rel=1e-5, abs=1e-6)


def test_fast_path_matches_checked_functions(rng):
    for d in (2, 3):
        phi = random_angles(rng, d)
        U, lj = unit_hpd_and_log_jacobian(phi, d)
        assert np.array_equal(U, angles_to_unit_hpd(phi)) or np.allclose(U, angles_to_unit_hpd(phi), atol=1e-15)
        assert lj == pytest.approx(log_jacobian_angles(phi), abs=1e-13)


def test_log_jacobian_smooth_near_interior():
    phi = angle_midpoints(2)
    a, b = log_jacobian_angles(phi), log_jacobian_angles(phi + 1e-9)
    assert np.isfinite(a) and np.isfinite(b) and abs(a - b) < 1e-6


@pytest.mark.parametrize("d", [2, 3])
def test_sphere_volume_by_monte_carlo_over_angles(d, rng):
    # int J(phi) d phi over the angle box equals the chart volume of the trace-one slice
    ub = angle_upper_bounds(d)
    m = 20000
    J = np.array([math.exp(unit_hpd_and_log_jacobian(ub * rng.uniform(size=ub.size), d)[1]) for _ in range(m)])
    box = float(np.prod(ub))
    est, se = box * J.mean(), box * J.std(ddof=1) / math.sqrt(m)
    assert abs(est - unit_sphere_volume(d)) < 4 * se


def test_uniform_sampler_two_routes_agree(rng):
    # Hilbert-Schmidt (Lebesgue) measure on trace-one matrices: E tr U^2 = 2d / (d^2 + 1)
    d = 2
    f = lambda U: np.einsum("nij,nji->n", U, U).real  # noqa: E731
    A = f(sample_uniform_unit_hpd_rejection(d, rng, 1500))
    B = f(sample_uniform_unit_hpd(d, rng, 20000))
    target = 2 * d / (d * d + 1)
    assert abs(A.mean() - target) < 4 * A.std(ddof=1) / math.sqrt(A.size)
    assert abs(B.mean() - target) < 4 * B.std(ddof=1) / math.sqrt(B.size)


def test_angles_out_of_range_rejected():
    with pytest.raises(DomainError):
        angles_to_unit_hpd(np.array([2.0, 1.0, 1.0]))
    with pytest.raises(DomainError):
        angles_to_unit_hpd(np.array([1.0, 1.0]))
    with pytest.raises(DomainError):
        unit_hpd_to_angles(np.array([[1.0, 0], [0, 0]]))


def test_hpd_sqrt_examples(rng):
    assert np.allclose(hpd_sqrt(np.eye(3)), np.eye(3))
    assert np.allclose(hpd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    for _ in range(50):
        Z = random_hpd(rng, 3, cond=10 ** rng.uniform(0, 6))
        S = hpd_sqrt(Z)
        assert np.linalg.norm(S @ S - Z) < 1e-10 * max(1.0, np.linalg.norm(Z))
        assert np.linalg.eigvalsh(S).min() > -1e-12
    with pytest.raises(DomainError):
        hpd_sqrt(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_norms_and_eigs_examples(rng):
    n = norms_and_eigs(np.eye(3))
    assert n.frobenius == pytest.approx(math.sqrt(3)) and n.trace_norm == pytest.approx(3)
    assert np.allclose(n.eigenvalues, 1)
    n = norms_and_eigs(np.diag([1.0, 2.0]))
    assert n.frobenius == pytest.approx(math.sqrt(5)) and n.trace_norm == pytest.approx(3)
    for _ in range(20):
        G = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        A = G + G.conj().T
        n = norms_and_eigs(A)
        assert n.frobenius == pytest.approx(math.sqrt(np.sum(n.eigenvalues**2)), rel=1e-10)


def test_eigenvalue_clamp_rule():
    assert np.all(check_hpsd(np.diag([1.0, -5e-13])) >= 0)
    with pytest.raises(DomainError):
        check_hpsd(np.diag([1.0, -1e-9]))


def test_matrix_json_round_trip(rng):
    A = random_hpd(rng, 3)
    obj = matrix_to_json(A)
    assert set(obj) == {"d", "re", "im"}
    assert np.array_equal(matrix_from_json(obj), A)


@given(st.integers(min_value=2, max_value=4), st.integers(min_value=0, max_value=2**32 - 1))
def test_unit_trace_and_psd_invariant(d, seed):
    phi = random_angles(np.random.default_rng(seed), d)
    U = angles_to_unit_hpd(phi)
    assert abs(U.trace().real - 1) < 1e-12
    assert np.linalg.eigvalsh(U).min() >= -1e-12
    assert np.allclose(U, U.conj().T, atol=0)
