"""Figure output: scalp topographies of spatial patterns and difference-ERP traces.

Figures are written as SVG with fixed metadata so reruns produce identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy.interpolate import RBFInterpolator  # noqa: E402

from .errors import ParameterError  # noqa: E402
from .layout import default_layout  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "rsvpipe"
matplotlib.rcParams["font.size"] = 8
matplotlib.rcParams["axes.linewidth"] = 0.6
matplotlib.rcParams["lines.linewidth"] = 1.0

HEAD_RADIUS = 0.5
_SVG_META = {"Date": None, "Creator": None}


def _positions(channels, layout):
    layout = default_layout(channels) if layout is None else layout
    missing = [c for c in channels if c not in layout]
    if missing:
        raise ParameterError(f"no layout position for channels: {missing}")
    return np.array([layout[c] for c in channels], dtype=float)


def interpolate_topography(pattern, channels, layout=None, resolution=64):
    """Thin-plate-spline interpolation of channel values onto a square grid.

    Returns ``(xx, yy, zz)``; grid points outside the head disk are NaN.
    """
    pattern = np.asarray(pattern, dtype=float)
    pos = _positions(channels, layout)
    if pattern.shape != (len(channels),):
        raise ParameterError(f"pattern has {pattern.size} values for {len(channels)} channels")
    extent = max(HEAD_RADIUS, np.abs(pos).max()) * 1.05
    g = np.linspace(-extent, extent, resolution)
    xx, yy = np.meshgrid(g, g)
    if np.all(pattern == 0):
        zz = np.zeros_like(xx)
    else:
        rbf = RBFInterpolator(pos, pattern, kernel="thin_plate_spline")
        zz = rbf(np.column_stack([xx.ravel(), yy.ravel()])).reshape(xx.shape)
    zz[np.hypot(xx, yy) > extent] = np.nan
    return xx, yy, zz


def emit_topomap(pattern, channels, path, layout=None, title=None):
    """Write a scalp map with a diverging color scale symmetric about zero."""
    xx, yy, zz = interpolate_topography(pattern, channels, layout)
    pos = _positions(channels, layout)
    vmax = float(np.nanmax(np.abs(zz))) if np.any(zz) else 1.0
    fig, ax = plt.subplots(figsize=(2.2, 2.2))
    ax.contourf(xx, yy, zz, levels=np.linspace(-vmax, vmax, 21), cmap="RdBu_r", vmin=-vmax, vmax=vmax)
    r = np.nanmax(np.hypot(xx, yy)[~np.isnan(zz)])
    ax.add_patch(plt.Circle((0, 0), r, fill=False, lw=0.8))
    ax.plot([-0.08 * r, 0, 0.08 * r], [r, 1.1 * r, r], "k", lw=0.8)
    ax.plot(pos[:, 0], pos[:, 1], "k.", ms=2)
    ax.set_aspect("equal")
    ax.set_axis_off()
    if title:
        ax.set_title(title)
    fig.savefig(path, format="svg", metadata=_SVG_META, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_difference_erp(times, diff, channels, path, highlight="Pz"):
    fig, ax = plt.subplots(figsize=(4, 2.5))
    ax.plot(times, diff.T, color="0.75", lw=0.5)
    if highlight in channels:
        ax.plot(times, diff[channels.index(highlight)], color="tab:red", lw=1.6, label=highlight)
        ax.legend(frameon=False)
    ax.axhline(0, color="k", lw=0.5)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("target - standard (uV)")
    fig.savefig(path, format="svg", metadata=_SVG_META, bbox_inches="tight")
    plt.close(fig)
    return path
