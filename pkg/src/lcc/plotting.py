"""Matplotlib renderings of charts, magnitude curves and velocity profiles.

Everything is written as SVG with a fixed hash salt and no date stamp, so
reruns on the same data produce identical files.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402
from matplotlib.patches import Patch  # noqa: E402

from .region_scanner import CELL_MARGINAL, PLANT_UNSTABLE, STRING_STABLE, StabilityChart  # noqa: E402

STABLE_BLUE = "#5b8fd6"
NEW_RED = "#d64545"

RC = {
    "svg.hashsalt": "lcc",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.linewidth": 0.8,
    "figure.dpi": 100,
}


def save_svg(fig, path) -> None:
    with plt.rc_context(RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _cell_edges(vals):
    vals = np.asarray(vals, dtype=float)
    if len(vals) == 1:
        return np.array([vals[0] - 0.5, vals[0] + 0.5])
    mid = 0.5 * (vals[1:] + vals[:-1])
    return np.concatenate(([2 * vals[0] - mid[0]], mid, [2 * vals[-1] - mid[-1]]))


def _cells(ax, codes, xe, ye, cmap, top):
    # One raster image instead of a path per cell keeps 201x201 SVGs small.
    ax.imshow(codes, cmap=cmap, vmin=-0.5, vmax=top + 0.5, origin="lower", interpolation="nearest",
              extent=(xe[0], xe[-1], ye[0], ye[-1]), aspect="auto")


def _chart_axes(chart: StabilityChart, ax):
    xe, ye = _cell_edges(chart.x_values), _cell_edges(chart.y_values)
    # 0 stable, 1 unstable, 2 plant unstable, 3 marginal
    cmap = ListedColormap([STABLE_BLUE, "white", "#bdbdbd", "#f2d16b"])
    _cells(ax, chart.labels, xe, ye, cmap, 3)
    plant = (chart.labels == PLANT_UNSTABLE).astype(float)
    if plant.any():
        ax.contourf(chart.x_values, chart.y_values, plant, levels=[0.5, 1.5], colors="none", hatches=["////"])
    ax.set_xlabel(chart.x_gain.label)
    ax.set_ylabel(chart.y_gain.label)
    ax.set_xlim(xe[0], xe[-1])
    ax.set_ylim(ye[0], ye[-1])


def plot_chart(chart: StabilityChart, path, title: str = "") -> None:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.6))
        _chart_axes(chart, ax)
        handles = [
            Patch(facecolor=STABLE_BLUE, label="string stable"),
            Patch(facecolor="#bdbdbd", hatch="////", label="plant unstable"),
        ]
        if (chart.labels == CELL_MARGINAL).any():
            handles.append(Patch(facecolor="#f2d16b", label="marginal"))
        ax.legend(handles=handles, loc="upper right", fontsize=7, framealpha=0.9)
        if title:
            ax.set_title(title)
        fig.tight_layout()
    save_svg(fig, path)


def plot_chart_delta(base: StabilityChart, new: StabilityChart, path, title: str = "") -> None:
    """Base string-stable cells in blue, cells only stable in ``new`` in red."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.6))
        layer = np.full(base.labels.shape, 0)
        layer[new.labels == STRING_STABLE] = 2
        layer[base.labels == STRING_STABLE] = 1
        xe, ye = _cell_edges(base.x_values), _cell_edges(base.y_values)
        _cells(ax, layer, xe, ye, ListedColormap(["white", STABLE_BLUE, NEW_RED]), 2)
        ax.set_xlabel(base.x_gain.label)
        ax.set_ylabel(base.y_gain.label)
        ax.legend(handles=[Patch(facecolor=STABLE_BLUE, label="stable before"),
                           Patch(facecolor=NEW_RED, label="newly stable")],
                  loc="upper right", fontsize=7, framealpha=0.9)
        if title:
            ax.set_title(title)
        fig.tight_layout()
    save_svg(fig, path)


def plot_magnitude(curves: dict, path, title: str = "") -> None:
    """``curves`` maps a label to (omega, |Gamma|^2)."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for label, (omega, mag2) in curves.items():
            ax.plot(omega, mag2, label=label, lw=1.2)
        ax.axhline(1.0, color="k", lw=0.6, ls="--")
        ax.set_xscale("log")
        ax.set_xlabel(r"$\omega$ [rad/s]")
        ax.set_ylabel(r"$|\Gamma(j\omega)|^2$")
        ax.legend(fontsize=8)
        if title:
            ax.set_title(title)
        fig.tight_layout()
    save_svg(fig, path)


def plot_velocity_profile(result, path, title: str = "") -> None:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.plot(result.times, result.head_velocity, color="goldenrod", lw=1.0, label="head")
        cmap = plt.get_cmap("viridis")
        nv = len(result.vehicles)
        for j, v in enumerate(result.vehicles):
            style = dict(color="tab:blue", lw=1.6) if v == 0 else dict(color=cmap(j / max(nv - 1, 1)), lw=0.9)
            ax.plot(result.times, result.velocity[j], label=f"vehicle {v}", **style)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("velocity [m/s]")
        ax.legend(fontsize=7, ncol=2)
        if title:
            ax.set_title(title)
        fig.tight_layout()
    save_svg(fig, path)
