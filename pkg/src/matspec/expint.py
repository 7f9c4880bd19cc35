"""Exponential integral E1 and its inverse.

E1(x) = int_x^inf exp(-s)/s ds is evaluated with the power series for
x <= 1 and a modified-Lentz continued fraction for x > 1.  Both paths are
vectorised over numpy arrays; the log form stays finite for large x where
E1 itself underflows.
"""

from __future__ import annotations

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061
_SERIES_TERMS = 30
_CF_MAX_ITER = 500
_TINY = 1e-300
_EPS = 1e-16


def _series(x: np.ndarray) -> np.ndarray:
    # -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    total = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, _SERIES_TERMS + 1):
        term = term * (-x) / k
        total += term / k
    return -EULER_GAMMA - np.log(x) - total


def _log_continued_fraction(x: np.ndarray) -> np.ndarray:
    # log of the continued fraction h with E1(x) = h exp(-x)
    b = x + 1.0
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _CF_MAX_ITER + 1):
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if np.all(np.abs(delta - 1.0) < _EPS):
            break
    return np.log(h)


def log_exp1(x):
    """Natural log of E1(x) for x > 0, elementwise."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("E1 is defined for strictly positive arguments only")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    small = x <= 1.0
    if np.any(small):
        out[small] = np.log(_series(x[small]))
    if np.any(~small):
        xl = x[~small]
        out[~small] = _log_continued_fraction(xl) - xl
    return out[0] if scalar else out


def exp1(x):
    """Exponential integral E1(x) for x > 0, elementwise.

    Examples
    --------
    >>> round(float(exp1(1.0)), 8)
    0.21938393
    """
    return np.exp(log_exp1(x))


def log_exp1_from_log(log_x):
    """log E1(exp(log_x)), finite even where exp(log_x) underflows."""
    u = np.asarray(log_x, dtype=float)
    floor = np.log(np.finfo(float).tiny)
    deep = np.log(np.abs(EULER_GAMMA + u) + 1e-300)
    safe = log_exp1(np.exp(np.maximum(u, floor)))
    return np.where(u < floor, deep, safe)


def inverse_exp1(t, *, return_log: bool = False, tol: float = 1e-14, max_iter: int = 200):
    """Solve E1(x) = t for x > 0, elementwise.

    Newton iterations run on u = log x, safeguarded by a bisection bracket.
    With ``return_log`` the root is returned as log x, which stays exact when
    x itself is below the double range (t beyond roughly 708).  Otherwise
    such roots are clamped to the smallest positive normal double.
    """
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("E1 takes values in (0, inf); target must be positive")
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    log_t = np.log(t)
    floor = np.log(np.finfo(float).tiny)

    # starting points: E1(x) ~ -gamma - log x + x near 0, ~ exp(-x)/(x+1) far out
    big = t > 0.6
    u_small_x = -EULER_GAMMA - t
    for _ in range(3):
        u_small_x = -EULER_GAMMA - t + np.exp(np.maximum(u_small_x, floor))
    lx = np.maximum(-log_t, 0.0)
    x_far = np.maximum(lx - np.log1p(lx), 0.3)
    for _ in range(3):
        x_far = np.maximum(lx - np.log1p(x_far), 0.3)
    u = np.where(big, u_small_x, np.log(x_far))

    lo = np.full_like(t, -np.inf)
    hi = np.full_like(t, np.inf)
    active = np.ones_like(t, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        ua = u[active]
        le = log_exp1_from_log(ua)
        g = le - log_t[active]
        # g is decreasing in u: g > 0 means the root lies to the right
        lo_a = np.where(g > 0, np.maximum(lo[active], ua), lo[active])
        hi_a = np.where(g <= 0, np.minimum(hi[active], ua), hi[active])
        xa = np.exp(np.maximum(ua, floor))
        slope = np.where(ua < floor, -1.0 / np.abs(EULER_GAMMA + ua), -np.exp(-xa - le))
        cand = ua - g / slope
        bounded = np.isfinite(lo_a) & np.isfinite(hi_a)
        outside = ((cand < lo_a) | (cand > hi_a) | ~np.isfinite(cand)) & (cand != ua)
        cand = np.where(outside & bounded, 0.5 * (lo_a + hi_a), cand)
        cand = np.where(outside & ~bounded & (g > 0), ua + 1.0, cand)
        cand = np.where(outside & ~bounded & (g <= 0), ua - 1.0, cand)
        converged = np.abs(g) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(log_t[active]))
        done = converged | (np.abs(cand - ua) <= tol * np.maximum(1.0, np.abs(ua)))
        u[active] = np.where(converged, ua, cand)
        lo[active], hi[active] = lo_a, hi_a
        idx = np.flatnonzero(active)
        active[idx[done]] = False

    if return_log:
        return u[0] if scalar else u
    x = np.exp(np.maximum(u, floor))
    return x[0] if scalar else x


def log_exp1_scalar(x: float) -> float:
    """Scalar log E1(x) with plain float arithmetic; same two regimes as :func:`log_exp1`."""
    if not x > 0:
        raise ValueError("E1 is defined for strictly positive arguments only")
    if x <= 1.0:
        total = 0.0
        term = 1.0
        for k in range(1, _SERIES_TERMS + 1):
            term *= -x / k
            total += term / k
        return math.log(-EULER_GAMMA - math.log(x) - total)
    b = x + 1.0
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAX_ITER + 1):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.log(h) - x
