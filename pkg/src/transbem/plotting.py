"""Figure rendering for the command-line reports (Agg backend, file output)."""

from __future__ import annotations

import os
import tempfile

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _atomic_savefig(fig, path):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".png")
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=130, bbox_inches="tight")
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.remove(tmp)


def field_figure(path, xs, ys, values, regions):
    """Heatmap of the two harmonic fields; masked cells are the skip band."""
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    grid = np.asarray(values, dtype=float).reshape(len(ys), len(xs))
    mask = np.asarray(regions, dtype=object).reshape(len(ys), len(xs)) == "skip"
    masked = np.ma.array(grid, mask=mask)

    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    im = ax.pcolormesh(xs, ys, masked, shading="nearest", cmap="RdBu_r")
    fig.colorbar(im, ax=ax, label="field value")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("transmission solution (masked near boundaries)")
    _atomic_savefig(fig, path)


def trace_figure(path, trace):
    """Residual history of a nonlinear solve."""
    its = [row[0] for row in trace]
    res = [max(row[1], 1e-300) for row in trace]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(its, res, "o-")
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual max-norm")
    ax.set_title("nonlinear convergence")
    ax.grid(True, which="both", alpha=0.3)
    _atomic_savefig(fig, path)


def branch_figure(path, s_values, residuals, probe_columns, probe_names):
    """Probe values and residuals along the continuation branch."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 6.0), sharex=True)
    for name, col in zip(probe_names, probe_columns):
        ax1.plot(s_values, col, "o-", label=name, markersize=3)
    if probe_names:
        ax1.legend(fontsize=8)
    ax1.set_ylabel("probe value")
    ax1.set_title("continuation branch")
    ax2.semilogy(s_values, [max(r, 1e-300) for r in residuals], "s-", color="gray")
    ax2.set_xlabel("family parameter s")
    ax2.set_ylabel("residual")
    for ax in (ax1, ax2):
        ax.grid(True, alpha=0.3)
    _atomic_savefig(fig, path)


def convergence_figure(path, n_values, delta_columns, names):
    """Probe differences against the finest discretization level."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name, col in zip(names, delta_columns):
        ax.semilogy(n_values, [max(abs(d), 1e-300) for d in col], "o-", label=name)
    ax.set_xlabel("node count N")
    ax.set_ylabel("|delta| vs finest level")
    ax.set_title("discretization convergence")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    _atomic_savefig(fig, path)
