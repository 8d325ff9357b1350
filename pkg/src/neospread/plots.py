"""Figure rendering for the report path.

All figures are written to files (SVG by default) next to the delimited
output; nothing is shown interactively.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _cell_scatter(ax, grid, values_per_cell, label):
    sc = ax.scatter(grid.lon, grid.lat, c=values_per_cell, s=14, marker="s",
                    cmap="viridis")
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    plt.colorbar(sc, ax=ax, label=label)


def timing_map(grid, labels, onset_bc_by_region: dict, path) -> None:
    """Choropleth of transition timing (sim BC) painted on the raster cells."""
    values = np.full(len(grid), np.nan)
    for region, onset in onset_bc_by_region.items():
        values[np.asarray(labels) == region] = onset
    fig, ax = plt.subplots(figsize=(7, 5))
    _cell_scatter(ax, grid, values, "onset, sim BC")
    ax.set_title("Timing of the agropastoral transition")
    fig.savefig(path)
    plt.close(fig)


def immigrant_fraction_map(grid, labels, fractions: dict, path) -> None:
    values = np.full(len(grid), np.nan)
    for region, frac in fractions.items():
        values[np.asarray(labels) == region] = frac
    fig, ax = plt.subplots(figsize=(7, 5))
    _cell_scatter(ax, grid, values, "immigrant fraction at 90% completion")
    ax.set_title("Immigrant contribution to agropastoral populations")
    fig.savefig(path)
    plt.close(fig)


def immigrant_fraction_bars(fractions: dict, path) -> None:
    """Fallback when no raster is available: per-region bar chart."""
    regions = sorted(fractions)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar(regions, [fractions[r] for r in regions], color="#367c5c")
    ax.set_xlabel("region")
    ax.set_ylabel("immigrant fraction")
    ax.set_ylim(0, 1)
    fig.savefig(path)
    plt.close(fig)


def lag_distance_plot(distances_km, ages_bc, center_age_bc, result, path,
                      label="simulated regions") -> None:
    """Scatter of lag vs distance with the regression line and the
    5%-earliest front per distance bin."""
    lag = center_age_bc - np.asarray(ages_bc, dtype=float)
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    ax.plot(lag, distances_km, "o", ms=4, alpha=0.6, label=label)
    xs = np.array([lag.min(), lag.max()])
    ax.plot(xs, result.intercept + result.slope * xs, "r-",
            label=f"slope {result.slope:.2f} km/a, r$^2$={result.r2:.2f}")
    edges = result.bin_edges_km
    centers = 0.5 * (edges[:-1] + edges[1:])
    front_lag = center_age_bc - result.percentile_front_bc
    ok = ~np.isnan(front_lag)
    ax.step(front_lag[ok], centers[ok], where="mid", color="k", lw=1.2,
            label="p=0.05 earliest front")
    ax.set_xlabel("lag since centre onset (a)")
    ax.set_ylabel("great-circle distance from centre (km)")
    ax.legend(loc="best", fontsize=8)
    fig.savefig(path)
    plt.close(fig)


def focus_histogram_plot(hist, path, title="") -> None:
    edges = hist.bin_edges_bc
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = edges[1] - edges[0]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(centers, hist.counts, width=width * 0.9, color="#888", label="sites")
    if hist.model_density is not None and hist.counts.sum() > 0:
        scale = hist.counts.sum()
        ax.plot(centers, hist.model_density * scale, "r-", label="model")
    ax.invert_xaxis()   # older (larger BC) on the left
    ax.set_xlabel("age (cal BC)")
    ax.set_ylabel("site count")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.savefig(path)
    plt.close(fig)
