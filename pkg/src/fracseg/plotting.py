"""Report figures (Agg backend, PNG files)."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.8),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "savefig.bbox": "tight",
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.stem}.", suffix=".png")
    os.close(fd)
    try:
        fig.savefig(tmp, format="png", metadata={"Software": None})
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def plot_densities(x, u, gamma, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i, ui in enumerate(np.atleast_2d(u)):
            ax.plot(x, ui, lw=1.2, label=f"$u_{i}$")
        for g in gamma:
            ax.axvline(g, color="k", lw=0.6, ls="--")
        ax.set_xlabel("$x$")
        ax.set_ylabel("density")
        ax.legend()
        return _save(fig, path)


def plot_frequency(diags, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for d in diags:
            p = d.profile
            line, = ax.semilogx(p.radii, p.N, lw=1.2, label=f"N at x={p.x0:.4g}")
            ax.semilogx(p.radii, d.monotone.corrected - 1.0, lw=0.8, ls=":", color=line.get_color(),
                        label=f"corrected, C={d.monotone.C:.3g}")
        if diags:
            s = diags[0].profile.s
            ax.axhline(s, color="k", lw=0.6, ls="--", label="$s$")
        ax.set_xlabel("$r$")
        ax.set_ylabel("frequency")
        ax.legend()
        return _save(fig, path)


def plot_holder(diags, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for d in diags:
            p = d.profile
            ax.loglog(p.radii, p.H, "o-", ms=3, lw=1.0,
                      label=rf"H at x={p.x0:.4g}, $\hat\alpha$={d.holder.alpha:.3f}")
        ax.set_xlabel("$r$")
        ax.set_ylabel("$H(r)$")
        ax.legend()
        return _save(fig, path)
