"""Minimal matplotlib renderings written as SVG next to the CSV outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp, so reruns give identical files
matplotlib.rcParams["svg.hashsalt"] = "chemostat-biogas"
matplotlib.rcParams["svg.fonttype"] = "none"
matplotlib.rcParams["font.size"] = 9
matplotlib.rcParams["axes.grid"] = True
matplotlib.rcParams["grid.alpha"] = 0.3

COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def phase_portrait(path, trajectories, s_in, title=""):
    """``trajectories``: list of (label, x array, s array)."""
    fig, ax = plt.subplots(figsize=(5, 4))
    labels = {}
    for label, x, s in trajectories:
        if label not in labels:
            labels[label] = COLORS[len(labels) % len(COLORS)]
        ax.plot(x, s, color=labels[label], lw=1.0, label=label)
        ax.plot(x[:1], s[:1], "o", color=labels[label], ms=3)
    ax.plot([0, s_in], [s_in, 0], "k-", lw=1.2, label="x + s = s_in")
    handles, names = ax.get_legend_handles_labels()
    uniq = dict(zip(names, handles))
    ax.legend(uniq.values(), uniq.keys(), fontsize=7)
    ax.set_xlabel("x")
    ax.set_ylabel("s")
    ax.set_xlim(left=0)
    ax.set_ylim(0, s_in)
    ax.set_title(title)
    _save(fig, path)


def heatmap(path, xs, ys, values, xlabel, ylabel, title="", cmap="viridis", center=False):
    fig, ax = plt.subplots(figsize=(5, 4))
    v = np.asarray(values, dtype=float)
    kw = {}
    if center:
        lim = np.nanmax(np.abs(v)) or 1.0
        kw = {"vmin": -lim, "vmax": lim}
        cmap = "RdBu_r"
    mesh = ax.pcolormesh(xs, ys, v, shading="nearest", cmap=cmap, **kw)
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(False)
    _save(fig, path)


def time_series(path, series, title=""):
    """``series``: list of (label, t, x, s, u)."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    for k, (label, t, x, s, u) in enumerate(series):
        c = COLORS[k % len(COLORS)]
        ax1.plot(t, x, "-", color=c, lw=1.0, label=f"x, {label}")
        ax1.plot(t, s, "--", color=c, lw=1.0, label=f"s, {label}")
        ax2.step(t, u, where="post", color=c, lw=1.0, label=label)
    ax1.set_xlabel("t")
    ax1.legend(fontsize=6)
    ax2.set_xlabel("t")
    ax2.set_ylabel("u")
    ax2.legend(fontsize=7)
    fig.suptitle(title)
    _save(fig, path)


def reward_curves(path, T, curves, title="", ylabel="J^T"):
    """``curves``: list of (label, values)."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for k, (label, vals) in enumerate(curves):
        ax.plot(T, vals, color=COLORS[k % len(COLORS)], lw=1.2, label=label)
    ax.set_xlabel("T")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=7)
    ax.set_title(title)
    _save(fig, path)
