"""SVG figures for run artifacts (non-interactive Agg backend)."""
from typing import Dict, Optional, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

# fixed salt and no date make the SVG bytes depend only on the data
SVG_RC = {"svg.hashsalt": "dicke-feedback", "svg.fonttype": "path"}


def save_svg(fig, path) -> None:
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _axes(xlabel: str, ylabel: str, title: Optional[str] = None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    return fig, ax


def plot_curves(x: np.ndarray, curves: Dict[str, np.ndarray], xlabel: str, ylabel: str,
                title: Optional[str] = None, logy: bool = False, logx: bool = False):
    fig, ax = _axes(xlabel, ylabel, title)
    for label, y in curves.items():
        ax.plot(x, y, label=label)
    if logy:
        ax.set_yscale("log")
    if logx:
        ax.set_xscale("log")
    if len(curves) > 1:
        ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def plot_sweep(ratios: Sequence[float], variances: Sequence[float],
               fitted: Optional[np.ndarray] = None, title: Optional[str] = None):
    """<X^2> against 1 - G/G_crit on log axes, with the fitted curve if given."""
    fig, ax = _axes("1 - G/G_crit", "<X^2>", title)
    distance = 1 - np.asarray(ratios, dtype=float)
    ax.loglog(distance, variances, "o", ms=3, label="computed")
    if fitted is not None:
        ax.loglog(distance, fitted, "-", label="fit")
        ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def plot_points(x: Sequence[float], y: Sequence[float], xlabel: str, ylabel: str,
                title: Optional[str] = None):
    fig, ax = _axes(xlabel, ylabel, title)
    ax.plot(x, y, "o-", ms=4)
    fig.tight_layout()
    return fig


def plot_band(times: np.ndarray, mean: np.ndarray, err: np.ndarray, xlabel: str, ylabel: str,
              title: Optional[str] = None):
    fig, ax = _axes(xlabel, ylabel, title)
    ax.plot(times, mean)
    ax.fill_between(times, mean - err, mean + err, alpha=0.3, linewidth=0)
    fig.tight_layout()
    return fig
