"""Hermitian matrix helpers and hyperspherical coordinates of unit-trace Hpd matrices.

A unit-trace Hpd matrix ``U`` is written as ``U = T T*`` with ``T`` its lower
Cholesky factor.  Because ``tr U = ||T||_F^2 = 1``, the real vector

    v = (T_11, ..., T_dd, Re T_21, Im T_21, Re T_31, Im T_31, Re T_32, ...)

lies on the unit sphere of R^{d^2}.  It is parametrised by ``d^2 - 1`` angles
``phi`` through

    v_1 = prod_{l>=1} sin(phi_l),
    v_j = cos(phi_{j-1}) prod_{l>=j} sin(phi_l),   j = 2, ..., d^2.

The first ``d - 1`` angles live in (0, pi/2), which keeps the Cholesky
diagonal positive; all remaining angles live in (0, pi).

Lebesgue measure ``dU`` on the trace-one slice refers to the chart
``(U_11, ..., U_{d-1,d-1}, Re U_21, Im U_21, ...)`` returned by
:func:`unit_trace_chart`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

HERMITIAN_ATOL = 1e-10
EIG_CLAMP = 1e-12


class DomainError(ValueError):
    """Input outside the domain of a matrix operation."""


def n_angles(d: int) -> int:
    return d * d - 1


def dim_from_angles(n: int) -> int:
    d = int(round(math.sqrt(n + 1)))
    if d * d - 1 != n:
        raise DomainError(f"{n} angles do not correspond to any dimension d (need d^2 - 1)")
    return d


def angle_upper_bounds(d: int) -> np.ndarray:
    """Upper ends of the open angle intervals; lower ends are all zero."""
    return _angle_upper_bounds(d).copy()


@lru_cache(maxsize=None)
def _angle_upper_bounds(d: int) -> np.ndarray:
    ub = np.full(n_angles(d), np.pi)
    ub[: d - 1] = np.pi / 2
    ub.setflags(write=False)
    return ub


def angle_midpoints(d: int) -> np.ndarray:
    return 0.5 * angle_upper_bounds(d)


def check_angles(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float).reshape(-1)
    d = dim_from_angles(phi.size)
    ub = angle_upper_bounds(d)
    if np.any(phi <= 0) or np.any(phi >= ub):
        raise DomainError("hyperspherical angle outside its open interval")
    return phi


def angles_in_box(phi, d: int) -> bool:
    ub = angle_upper_bounds(d)
    return bool(np.all(phi > 0) and np.all(phi < ub))


def _sphere_point(phi: np.ndarray) -> np.ndarray:
    m = phi.size + 1
    s = np.sin(phi)
    # tail[j] = prod_{l >= j} sin(phi_l) with 0-based l
    tail = np.ones(m)
    tail[: m - 1] = np.cumprod(s[::-1])[::-1]
    v = np.empty(m)
    v[0] = tail[0]
    v[1:] = np.cos(phi) * tail[1:]
    return v


@lru_cache(maxsize=None)
def _flat_positions(d: int):
    # flat indices of the diagonal and strictly lower entries of a d x d matrix
    rows, cols = np.tril_indices(d, -1)
    return np.arange(d) * (d + 1), rows * d + cols


def _cholesky_from_vector(v: np.ndarray, d: int) -> np.ndarray:
    diag, lower = _flat_positions(d)
    T = np.zeros(d * d, dtype=complex)
    T[diag] = v[:d]
    T[lower] = v[d::2] + 1j * v[d + 1::2]
    return T.reshape(d, d)


def _vector_from_cholesky(T: np.ndarray) -> np.ndarray:
    d = T.shape[0]
    rows, cols = np.tril_indices(d, -1)
    off = T[rows, cols]
    return np.concatenate([T.diagonal().real, np.column_stack([off.real, off.imag]).ravel()])


def angles_to_unit_hpd(phi) -> np.ndarray:
    """Map hyperspherical angles to a unit-trace Hpd matrix.

    Parameters
    ----------
    phi : array_like, shape (d**2 - 1,)
        Angles inside their open intervals (see module docstring).

    Returns
    -------
    U : ndarray, shape (d, d), complex
        ``T T*`` for the Cholesky factor encoded by ``phi``; ``tr U == 1``.
    """
    phi = check_angles(phi)
    d = dim_from_angles(phi.size)
    if d == 1:
        return np.ones((1, 1), dtype=complex)
    T = _cholesky_from_vector(_sphere_point(phi), d)
    U = T @ T.conj().T
    return U / U.trace().real


def unit_hpd_to_angles(U) -> np.ndarray:
    """Inverse of :func:`angles_to_unit_hpd` for strictly positive definite U."""
    U = np.asarray(U, dtype=complex)
    d = U.shape[0]
    if d == 1:
        return np.empty(0)
    U = 0.5 * (U + U.conj().T)
    U = U / U.trace().real
    try:
        T = np.linalg.cholesky(U)
    except np.linalg.LinAlgError as exc:
        raise DomainError("matrix is not positive definite") from exc
    v = _vector_from_cholesky(T)
    v = v / np.linalg.norm(v)
    head = np.sqrt(np.cumsum(v * v))  # ||v_{1..j}||
    return np.arctan2(head[:-1], v[1:])


def log_jacobian_angles(phi) -> float:
    """Log absolute Jacobian determinant of ``phi -> unit_trace_chart(U)``.

    Closed form: the sphere surface element in these angles is
    ``prod_{l>=2} sin(phi_l)^(l-1)`` (1-based ``l``), and the Cholesky map
    restricted to the unit sphere contributes
    ``2^(d-1) prod_i T_ii^(2(d-i)+1)``.
    """
    phi = check_angles(phi)
    d = dim_from_angles(phi.size)
    if d == 1:
        return 0.0
    v = _sphere_point(phi)
    powers = 2 * (d - np.arange(1, d + 1)) + 1
    out = (d - 1) * math.log(2.0) + float(np.sum(powers * np.log(v[:d])))
    l = np.arange(1, phi.size + 1)  # 1-based index of each angle
    out += float(np.sum((l[1:] - 1) * np.log(np.sin(phi[1:]))))
    return out


def unit_hpd_and_log_jacobian(phi: np.ndarray, d: int):
    """Unchecked fast path returning ``(angles_to_unit_hpd(phi), log_jacobian_angles(phi))``.

    The caller guarantees that ``phi`` lies inside the angle box.
    """
    if d == 1:
        return np.ones((1, 1), dtype=complex), 0.0
    v = _sphere_point(phi)
    T = _cholesky_from_vector(v, d)
    U = T @ T.conj().T
    U /= U.trace().real
    out = (d - 1) * _LOG2 + float(np.dot(_jac_powers(d), np.log(v[:d])))
    out += float(np.dot(np.arange(1, phi.size), np.log(np.sin(phi[1:]))))
    return U, out


def _jac_powers(d: int) -> np.ndarray:
    return 2 * (d - np.arange(1, d + 1)) + 1


_LOG2 = math.log(2.0)


def unit_trace_chart(U) -> np.ndarray:
    """Real coordinates of a trace-one Hermitian matrix (length d^2 - 1)."""
    U = np.asarray(U, dtype=complex)
    d = U.shape[0]
    rows, cols = np.tril_indices(d, -1)
    off = U[rows, cols]
    return np.concatenate([U.diagonal().real[: d - 1], np.column_stack([off.real, off.imag]).ravel()])


def unit_sphere_volume(d: int) -> float:
    """Lebesgue volume of the trace-one Hpsd matrices in the chart coordinates.

    Equals pi^{d(d-1)/2} prod_{k=1}^{d} Gamma(k) / Gamma(d^2).
    """
    return math.exp(log_unit_sphere_volume(d))


def log_unit_sphere_volume(d: int) -> float:
    k = np.arange(1, d + 1)
    return 0.5 * d * (d - 1) * math.log(math.pi) + float(np.sum(gammaln(k))) - float(gammaln(d * d))


def sample_uniform_unit_hpd(d: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw unit-trace Hpd matrices uniformly w.r.t. the chart Lebesgue measure.

    Uses the fact that ``G G* / tr(G G*)`` with ``G`` a square complex
    Ginibre matrix is uniformly distributed on the trace-one slice.
    """
    n = 1 if size is None else size
    G = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
    W = G @ np.conj(np.swapaxes(G, -1, -2))
    tr = np.trace(W, axis1=-2, axis2=-1).real
    U = W / tr[:, None, None]
    U = 0.5 * (U + np.conj(np.swapaxes(U, -1, -2)))
    return U[0] if size is None else U


def sample_uniform_unit_hpd_rejection(d: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform unit-trace Hpd matrices by rejection from the angle box.

    Angles are proposed uniformly and accepted with probability
    ``J(phi) / 2^(d-1)``, the bound holding because every factor of the
    Jacobian other than ``2^(d-1)`` is a power of a number in (0, 1].
    The acceptance rate falls quickly with d (about 2% at d = 2), so this
    is a reference route for small d, not a production sampler.
    """
    n = 1 if size is None else size
    ub = _angle_upper_bounds(d)
    out = np.empty((n, d, d), dtype=complex)
    m = 0
    while m < n:
        phi = rng.uniform(0.0, 1.0, (max(64, 4 * (n - m)), ub.size)) * ub
        u = rng.uniform(size=phi.shape[0])
        for p, ui in zip(phi, u):
            if m == n:
                break
            if not np.all(p > 0):
                continue
            U, lj = unit_hpd_and_log_jacobian(p, d)
            if math.log(ui) < lj - (d - 1) * _LOG2:
                out[m] = U
                m += 1
    return out[0] if size is None else out


def is_hermitian(A, atol: float = HERMITIAN_ATOL) -> bool:
    A = np.asarray(A)
    return A.ndim == 2 and A.shape[0] == A.shape[1] and np.allclose(A, A.conj().T, atol=atol, rtol=0)


def hermitian_eigvalsh(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if not is_hermitian(A):
        raise DomainError("matrix is not Hermitian")
    return np.linalg.eigvalsh(0.5 * (A + A.conj().T))


def check_hpsd(A, clamp: float = EIG_CLAMP) -> np.ndarray:
    """Return the clamped eigenvalues of ``A``; raise if any is below ``-clamp``."""
    lam = hermitian_eigvalsh(A)
    if np.any(lam < -clamp):
        raise DomainError(f"matrix is not positive semidefinite (min eigenvalue {lam.min():.3e})")
    return np.where(lam < 0, 0.0, lam)


def hpd_sqrt(Z) -> np.ndarray:
    """Unique Hpsd square root via eigendecomposition.

    >>> np.allclose(hpd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    True
    """
    Z = np.asarray(Z, dtype=complex)
    if not is_hermitian(Z):
        raise DomainError("hpd_sqrt needs a Hermitian matrix")
    lam, V = np.linalg.eigh(0.5 * (Z + Z.conj().T))
    if np.any(lam < -EIG_CLAMP * max(1.0, abs(lam).max())):
        raise DomainError("hpd_sqrt needs a positive semidefinite matrix")
    lam = np.clip(lam, 0.0, None)
    return (V * np.sqrt(lam)) @ V.conj().T


def hpd_power(Z, p: float) -> np.ndarray:
    """Real power of an Hpd matrix (strictly positive spectrum required)."""
    Z = np.asarray(Z, dtype=complex)
    lam, V = np.linalg.eigh(0.5 * (Z + Z.conj().T))
    if np.any(lam <= 0):
        raise DomainError("matrix power needs a positive definite matrix")
    return (V * lam**p) @ V.conj().T


@dataclass(frozen=True)
class MatrixNorms:
    frobenius: float
    trace_norm: float
    eigenvalues: np.ndarray


def norms_and_eigs(A) -> MatrixNorms:
    """Frobenius norm, trace norm and ascending eigenvalues of a Hermitian matrix."""
    A = np.asarray(A, dtype=complex)
    lam = hermitian_eigvalsh(A)
    fro = float(np.sqrt(np.sum(np.abs(A) ** 2)))
    return MatrixNorms(frobenius=fro, trace_norm=float(np.sum(np.abs(lam))), eigenvalues=lam)


def matrix_to_json(A) -> dict:
    A = np.asarray(A, dtype=complex)
    return {"d": int(A.shape[0]), "re": A.real.tolist(), "im": A.imag.tolist()}


def matrix_from_json(obj: dict) -> np.ndarray:
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj["im"], dtype=float)
    if re.shape != (obj["d"], obj["d"]) or im.shape != re.shape:
        raise ValueError("matrix JSON shape does not match its 'd' field")
    return re + 1j * im
