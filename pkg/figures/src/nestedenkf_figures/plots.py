"""Render functions: parsed harness tables in, matplotlib Figures out.

All figures are deterministic given their inputs: the Agg backend, a fixed
dpi, and date-free metadata make repeated renders byte-identical for raster
output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .schema import SchemaError, parameter_columns  # noqa: E402

DPI = 150

matplotlib.rcParams["svg.hashsalt"] = "nestedenkf-figures"


def save_figure(fig, out, fmt):
    """Write ``fig`` to ``out`` deterministically and release it."""
    metadata = {"Date": None} if fmt == "svg" else None
    fig.savefig(out, format=fmt, dpi=DPI, metadata=metadata)
    plt.close(fig)


def render_trace(header, data, refs=()):
    """Parameter-convergence traces: one panel per parameter, one line per
    replicate, dashed horizontal reference lines."""
    for col in ("replicate", "outer"):
        if col not in header:
            raise SchemaError(f"trace input missing column {col!r}")
    names = parameter_columns(header, "mean")
    if not names:
        raise SchemaError("trace input has no '<parameter>_mean' columns")
    replicate = data[:, header.index("replicate")]
    outer = data[:, header.index("outer")]
    fig, axes = plt.subplots(len(names), 1, figsize=(7, 2.2 * len(names)),
                             sharex=True, squeeze=False)
    for ax, name in zip(axes[:, 0], names):
        values = data[:, header.index(f"{name}_mean")]
        for rep in np.unique(replicate):
            sel = replicate == rep
            ax.plot(outer[sel], values[sel], lw=0.9,
                    label=f"replicate {int(rep)}")
        for ref in refs:
            ax.axhline(ref, ls="--", color="k", lw=0.8)
        ax.set_ylabel(name)
        ax.grid(True, alpha=0.3)
    axes[-1, 0].set_xlabel("outer assimilation cycle")
    if len(np.unique(replicate)) <= 6:
        axes[0, 0].legend(fontsize=8, loc="best")
    fig.suptitle("parameter estimates per outer cycle")
    fig.tight_layout()
    return fig


def render_curve(header, data, refs=()):
    """RMSE versus a one-parameter lattice, with replicate-spread error bars
    and the argmin marked."""
    for col in ("rmse_mean", "rmse_std"):
        if col not in header:
            raise SchemaError(f"curve input missing column {col!r}")
    params = [c for c in header
              if c not in ("rmse_mean", "rmse_std", "n_replicates")]
    if len(params) != 1:
        raise SchemaError("curve input must have exactly one parameter "
                          f"column, found {params!r}")
    x = data[:, header.index(params[0])]
    mean = data[:, header.index("rmse_mean")]
    std = data[:, header.index("rmse_std")]
    order = np.argsort(x)
    x, mean, std = x[order], mean[order], std[order]
    best = int(np.argmin(mean))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.errorbar(x, mean, yerr=std, fmt="o-", ms=3, lw=1, capsize=2)
    ax.plot(x[best], mean[best], "r*", ms=12,
            label=f"minimum at {params[0]}={x[best]:g}")
    for ref in refs:
        ax.axvline(ref, ls="--", color="k", lw=0.8)
    ax.set_xlabel(params[0])
    ax.set_ylabel("analysis RMSE")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render_heatmap(header, data, estimates=()):
    """RMSE over a two-parameter lattice: argmin star plus one circle per
    externally estimated parameter pair."""
    if "rmse_mean" not in header:
        raise SchemaError("heatmap input missing column 'rmse_mean'")
    params = [c for c in header
              if c not in ("rmse_mean", "rmse_std", "n_replicates")]
    if len(params) != 2:
        raise SchemaError("heatmap input must have exactly two parameter "
                          f"columns, found {params!r}")
    x = data[:, header.index(params[0])]
    y = data[:, header.index(params[1])]
    z = data[:, header.index("rmse_mean")]
    xu, yu = np.unique(x), np.unique(y)
    grid = np.full((len(yu), len(xu)), np.nan)
    grid[np.searchsorted(yu, y), np.searchsorted(xu, x)] = z
    if np.isnan(grid).any():
        raise SchemaError("heatmap input does not cover a full "
                          f"{len(xu)}x{len(yu)} lattice")
    fig, ax = plt.subplots(figsize=(7, 5))
    mesh = ax.pcolormesh(xu, yu, grid, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="analysis RMSE")
    iy, ix = np.unravel_index(np.argmin(grid), grid.shape)
    ax.plot(xu[ix], yu[iy], "w*", ms=14, mec="k", label="grid minimum")
    for ex, ey in estimates:
        ax.plot(ex, ey, "o", ms=9, mfc="none", mec="w", mew=1.5)
    if len(estimates):
        ax.plot([], [], "o", mfc="none", mec="k", label="estimates")
    ax.set_xlabel(params[0])
    ax.set_ylabel(params[1])
    ax.legend(fontsize=8, loc="upper right")
    fig.tight_layout()
    return fig


def render_boxplot(summary):
    """Final parameter estimates across replicates, one box per parameter."""
    names = summary["parameter_names"]
    replicates = summary["replicates"]
    if not replicates:
        raise SchemaError("summary has no replicate records")
    try:
        finals = np.array([rec["final_theta"] for rec in replicates],
                          dtype=float)
    except (KeyError, TypeError, ValueError) as err:
        raise SchemaError(f"replicate records lack final_theta ({err})") \
            from err
    if finals.ndim != 2 or finals.shape[1] != len(names):
        raise SchemaError(f"final_theta entries do not match "
                          f"parameter_names {names!r}")
    fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(names), 4.5))
    ax.boxplot(finals, tick_labels=names)
    for j in range(finals.shape[1]):
        ax.plot(np.full(finals.shape[0], j + 1), finals[:, j], "k.",
                ms=4, alpha=0.6)
    ax.set_ylabel("final estimate")
    ax.set_title(f"{finals.shape[0]} replicate(s)")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    return fig


def render_covariance_bars(header, data):
    """Residual covariance by ring distance, from the full matrix."""
    n = len(header)
    if data.shape != (n, n):
        raise SchemaError(f"covariance input must be square; got "
                          f"{data.shape[0]} rows x {data.shape[1]} columns")
    dist = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    dist = np.minimum(dist, n - dist)
    distances = np.arange(n // 2 + 1)
    values = [data[dist == d].mean() for d in distances]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(distances, values, color="tab:blue", edgecolor="k", lw=0.5)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("ring distance")
    ax.set_ylabel("residual covariance")
    ax.set_xticks(distances)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    return fig
