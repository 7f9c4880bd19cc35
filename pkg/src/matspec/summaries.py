"""Posterior summaries of spectral density draws.

Draws are arrays of shape (M, G, d, d).  Real and imaginary parts are
summarized separately with linear-interpolation quantiles.  The uniform
region works in the coordinates

    H f = (log f_11, ..., log f_dd, Re f_12, Im f_12, Re f_13, Im f_13, ..., Im f_{d-1,d}),

standardized by the median absolute deviation (no consistency factor).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

MAD_FLOOR = 1e-12


def _check_draws(draws) -> np.ndarray:
    S = np.asarray(draws)
    if S.ndim == 3:
        S = S[..., None]
    if S.ndim != 4 or S.shape[-1] != S.shape[-2]:
        raise ValueError("draws must have shape (M, G, d, d)")
    if S.shape[0] == 0:
        raise ValueError("no draws to summarize")
    return S


def upper_indices(d: int):
    return np.triu_indices(d, 1)


def h_transform(f) -> np.ndarray:
    """Map Hermitian matrices (..., d, d) to H-coordinates (..., d^2).

    Raises
    ------
    ValueError
        If a diagonal entry is not strictly positive.
    """
    f = np.asarray(f)
    d = f.shape[-1]
    diag = np.diagonal(f, axis1=-2, axis2=-1).real
    if np.any(~(diag > 0)):
        raise ValueError("diagonal entries must be positive for the log transform")
    iu, ju = upper_indices(d)
    off = f[..., iu, ju]
    parts = np.stack([off.real, off.imag], axis=-1).reshape(*off.shape[:-1], -1)
    return np.concatenate([np.log(diag), parts], axis=-1)


def h_inverse(h) -> np.ndarray:
    """Inverse of :func:`h_transform`, returning Hermitian matrices."""
    h = np.asarray(h, dtype=float)
    m = h.shape[-1]
    d = int(round(math.sqrt(m)))
    if d * d != m:
        raise ValueError("H-coordinates must have length d^2")
    out = np.zeros(h.shape[:-1] + (d, d), dtype=complex)
    idx = np.arange(d)
    out[..., idx, idx] = np.exp(h[..., :d])
    iu, ju = upper_indices(d)
    vals = h[..., d:].reshape(*h.shape[:-1], -1, 2)
    z = vals[..., 0] + 1j * vals[..., 1]
    out[..., iu, ju] = z
    out[..., ju, iu] = np.conj(z)
    return out


def h_labels(d: int) -> list:
    """(component_id, part) for each H-coordinate, e.g. ("f11", "re"), ("f12", "im")."""
    labels = [(f"f{i + 1}{i + 1}", "re") for i in range(d)]
    for i, j in zip(*upper_indices(d)):
        labels += [(f"f{i + 1}{j + 1}", "re"), (f"f{i + 1}{j + 1}", "im")]
    return labels


def h_plain(f) -> np.ndarray:
    """Untransformed coordinates in H order: f_ii then Re/Im of the upper entries."""
    f = np.asarray(f)
    d = f.shape[-1]
    diag = np.diagonal(f, axis1=-2, axis2=-1).real
    iu, ju = upper_indices(d)
    off = f[..., iu, ju]
    parts = np.stack([off.real, off.imag], axis=-1).reshape(*off.shape[:-1], -1)
    return np.concatenate([diag, parts], axis=-1)


@dataclass
class SpectralSummary:
    """Pointwise and uniform posterior summaries on a frequency grid.

    ``median`` is a (G, d, d) Hermitian array built from the componentwise
    medians of real and imaginary parts.  ``lower``/``upper`` hold the
    pointwise quantile bands and ``uniform_lower``/``uniform_upper`` the
    uniform envelopes, all in plain H order (G, d^2).
    """

    omegas: np.ndarray
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    quantiles: tuple
    uniform_lower: np.ndarray | None = None
    uniform_upper: np.ndarray | None = None
    c_level: float | None = None
    level: float | None = None

    @property
    def d(self) -> int:
        return self.median.shape[-1]

    def rows(self):
        labels = h_labels(self.d)
        med = h_plain(self.median)
        for g, om in enumerate(self.omegas):
            for c, (cid, part) in enumerate(labels):
                ulo = self.uniform_lower[g, c] if self.uniform_lower is not None else math.nan
                uhi = self.uniform_upper[g, c] if self.uniform_upper is not None else math.nan
                yield (om, cid, part, med[g, c], self.lower[g, c], self.upper[g, c], ulo, uhi)

    def to_csv(self, path) -> None:
        """Write columns omega, component_id, re_or_im, median, q05, q95, uniform_lo, uniform_hi."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["omega", "component_id", "re_or_im", "median", "q05", "q95", "uniform_lo", "uniform_hi"])
            for om, cid, part, *vals in self.rows():
                w.writerow(["%.17g" % om, cid, part] + ["%.17g" % v for v in vals])

    @classmethod
    def median_from_csv(cls, path):
        """Read back (omegas, median (G, d, d)) from a summary CSV."""
        return read_summary_median(path)


def read_summary_median(path):
    """Parse a summary CSV and rebuild the median matrix function."""
    vals: dict = {}
    omegas: list = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader)
        if head[:4] != ["omega", "component_id", "re_or_im", "median"]:
            raise ValueError(f"{path}: not a summary CSV")
        for lineno, row in enumerate(reader, start=2):
            try:
                om = float(row[0])
                med = float(row[3])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}: malformed row {lineno}") from exc
            if not omegas or omegas[-1] != om:
                omegas.append(om)
            vals[(len(omegas) - 1, row[1], row[2])] = med
    d = max(int(cid[1]) for _, cid, _ in vals)
    G = len(omegas)
    f = np.zeros((G, d, d), dtype=complex)
    for (g, cid, part), v in vals.items():
        i, j = int(cid[1]) - 1, int(cid[2]) - 1
        if part == "re":
            f[g, i, j] += v
            if i != j:
                f[g, j, i] += v
        else:
            f[g, i, j] += 1j * v
            f[g, j, i] -= 1j * v
    return np.asarray(omegas), f


def pointwise_summary(draws, omegas=None, quantiles=(0.05, 0.95)) -> SpectralSummary:
    """Componentwise median and quantile band of real and imaginary parts."""
    S = _check_draws(draws)
    M, G, d, _ = S.shape
    omegas = np.arange(G, dtype=float) if omegas is None else np.asarray(omegas, dtype=float)
    med = np.quantile(S.real, 0.5, axis=0) + 1j * np.quantile(S.imag, 0.5, axis=0)
    med = 0.5 * (med + np.conj(np.swapaxes(med, -1, -2)))
    P = h_plain(S)
    qs = np.quantile(P, list(quantiles), axis=0)
    return SpectralSummary(omegas=omegas, median=med, lower=qs[0], upper=qs[-1], quantiles=tuple(quantiles))


def uniform_region(draws, level: float = 0.9, summary: SpectralSummary | None = None, omegas=None):
    """Uniform credibility region in H-coordinates.

    Returns the summary with ``c_level`` set to the ceil(level M)-th
    smallest sup statistic and envelopes ``h_med +- c sigma`` mapped back
    entrywise (exp on the diagonal coordinates).
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    S = _check_draws(draws)
    M = S.shape[0]
    d = S.shape[-1]
    h = h_transform(S)
    h_med = np.quantile(h, 0.5, axis=0)
    sigma = np.maximum(np.quantile(np.abs(h - h_med), 0.5, axis=0), MAD_FLOOR)
    sup = np.max(np.abs(h - h_med) / sigma, axis=(1, 2))
    c = float(np.sort(sup)[math.ceil(level * M) - 1])
    lo = h_med - c * sigma
    hi = h_med + c * sigma
    lo[..., :d] = np.exp(lo[..., :d])
    hi[..., :d] = np.exp(hi[..., :d])
    if summary is None:
        summary = pointwise_summary(S, omegas)
    summary.uniform_lower = lo
    summary.uniform_upper = hi
    summary.c_level = c
    summary.level = level
    return summary


def sup_statistics(draws) -> np.ndarray:
    """Per-draw sup over (omega, coordinate) of |h - h_med| / MAD."""
    S = _check_draws(draws)
    h = h_transform(S)
    h_med = np.quantile(h, 0.5, axis=0)
    sigma = np.maximum(np.quantile(np.abs(h - h_med), 0.5, axis=0), MAD_FLOOR)
    return np.max(np.abs(h - h_med) / sigma, axis=(1, 2))


def summarize(draws, omegas=None, level: float = 0.9, quantiles=(0.05, 0.95)) -> SpectralSummary:
    return uniform_region(draws, level, pointwise_summary(draws, omegas, quantiles))


def error_metrics(estimate, truth):
    """(L1, L2) = (mean, root mean square) of Frobenius distances over the grid."""
    A = np.asarray(estimate)
    B = np.asarray(truth)
    if A.shape != B.shape:
        raise ValueError(f"grid mismatch: {A.shape} vs {B.shape}")
    if A.ndim == 1:
        A, B = A[:, None, None], B[:, None, None]
    dist = np.sqrt(np.sum(np.abs(A - B) ** 2, axis=(-2, -1)))
    return float(np.mean(dist)), float(math.sqrt(np.mean(dist**2)))
