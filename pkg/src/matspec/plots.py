"""Static SVG panels of spectral summaries.

One file per coordinate (f11, Re f12, Im f12, f22, ...).  Output is made
reproducible by fixing the SVG hash salt and dropping the date metadata.

Uniform envelopes are mapped back from the transformed coordinates entry
by entry; the resulting pair of matrix functions need not be Hpd and is
meant for display only.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .summaries import SpectralSummary, h_labels, h_plain  # noqa: E402


def panel_names(d: int) -> list:
    """File stems in coordinate order, e.g. ``["f11", "f22", "re_f12", "im_f12"]``."""
    out = []
    for cid, part in h_labels(d):
        i, j = cid[1], cid[2]
        out.append(cid if i == j else f"{part}_{cid}")
    return out


def plot_summary(summary: SpectralSummary, out_dir, prefix: str = "", periodogram=None, truth=None) -> list:
    """Write one SVG per coordinate and return the paths.

    Parameters
    ----------
    periodogram : ndarray (G, d, d), optional
        Drawn in gray, on the same grid as the summary.
    truth : ndarray (G, d, d), optional
        Drawn as a dashed line.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    d = summary.d
    med = h_plain(summary.median)
    per = h_plain(periodogram) if periodogram is not None else None
    tru = h_plain(truth) if truth is not None else None
    labels = h_labels(d)
    paths = []
    w = summary.omegas
    with plt.rc_context({"svg.hashsalt": "matspec", "svg.fonttype": "path"}):
        for c, name in enumerate(panel_names(d)):
            fig, ax = plt.subplots(figsize=(5, 3.2))
            if per is not None:
                ax.plot(w, per[:, c], color="0.7", lw=0.6, label="periodogram")
            if summary.uniform_lower is not None:
                ax.fill_between(w, summary.uniform_lower[:, c], summary.uniform_upper[:, c], color="tab:blue",
                                alpha=0.15, lw=0, label="uniform")
            ax.fill_between(w, summary.lower[:, c], summary.upper[:, c], color="tab:blue", alpha=0.35, lw=0,
                            label="pointwise")
            ax.plot(w, med[:, c], color="k", lw=1.2, label="median")
            if tru is not None:
                ax.plot(w, tru[:, c], color="tab:red", lw=1.0, ls="--", label="truth")
            cid, part = labels[c]
            title = cid if cid[1] == cid[2] else f"{'Re' if part == 're' else 'Im'} {cid}"
            ax.set_title(title)
            ax.set_xlabel("frequency")
            ax.set_xlim(0, np.pi)
            ax.legend(fontsize=6, loc="upper right")
            fig.tight_layout()
            path = out_dir / f"{prefix}{name}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
    return paths
