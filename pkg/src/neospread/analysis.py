"""Validation statistics: lag-distance regression and front speed,
percentile front curves, focus-region timing histograms with spatial-scale
broadening, and immigrant-fraction maps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

EARTH_RADIUS_KM = 6371.0


class DegenerateDataError(ValueError):
    """Raised when a regression has no usable spread in its inputs."""


def great_circle_km(lon_a, lat_a, lon_b, lat_b):
    """Haversine distance in km on a sphere of radius 6371 km."""
    lon_a, lat_a = np.radians(lon_a), np.radians(lat_a)
    lon_b, lat_b = np.radians(lon_b), np.radians(lat_b)
    dlat = lat_b - lat_a
    dlon = lon_b - lon_a
    h = np.sin(dlat / 2.0) ** 2 + np.cos(lat_a) * np.cos(lat_b) * np.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


@dataclass
class SiteRecord:
    """A dated site used for hindcast validation."""

    id: str
    lon: float
    lat: float
    median_bc: float   # median calibrated age, cal BC
    sigma: float       # dating uncertainty, years
    culture: str = ""


def load_sites(path) -> tuple[list[SiteRecord], int]:
    """Read the site CSV (id,lon,lat,median_calBC,sigma,culture).

    Malformed rows are skipped; returns (records, n_skipped).
    """
    records = []
    skipped = 0
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                rec = SiteRecord(
                    id=row["id"], lon=float(row["lon"]), lat=float(row["lat"]),
                    median_bc=float(row["median_calBC"]), sigma=float(row["sigma"]),
                    culture=row.get("culture", "") or "")
                if rec.sigma < 0:
                    raise ValueError("negative sigma")
            except (KeyError, TypeError, ValueError):
                skipped += 1
                continue
            records.append(rec)
    return records, skipped


@dataclass
class LagDistanceResult:
    slope: float       # km/a
    intercept: float   # km
    r2: float
    n: int
    bin_edges_km: np.ndarray
    percentile_front_bc: np.ndarray   # per bin: age with 5% of records older


def lag_distance(distances_km, ages_bc, center_age_bc: float,
                 bin_km: float = 500.0) -> LagDistanceResult:
    """OLS of distance against time lag since the center's onset.

    The lag of a record is ``center_age_bc - age_bc`` (years after the
    center), so the fitted slope is a front speed in km/a directly.  The
    percentile front gives, per 500-km distance bin, the age exceeded by
    only the earliest 5% of records (the p=0.05 earliest occurrence).
    """
    d = np.asarray(distances_km, dtype=float)
    ages = np.asarray(ages_bc, dtype=float)
    if len(d) < 3:
        raise DegenerateDataError("need at least 3 records")
    lag = center_age_bc - ages
    var_lag = np.var(lag)
    if var_lag == 0 or np.var(d) == 0:
        raise DegenerateDataError("no spread in lag or distance: slope undefined")
    cov = np.mean((lag - lag.mean()) * (d - d.mean()))
    slope = cov / var_lag
    intercept = d.mean() - slope * lag.mean()
    r2 = cov * cov / (var_lag * np.var(d))

    edges = np.arange(0.0, d.max() + bin_km, bin_km)
    fronts = np.full(len(edges) - 1, np.nan)
    for b in range(len(edges) - 1):
        sel = (d >= edges[b]) & (d < edges[b + 1])
        if sel.any():
            # oldest 5% boundary; on the cal BC axis older means larger
            fronts[b] = np.quantile(ages[sel], 0.95, method="linear")
    return LagDistanceResult(slope=float(slope), intercept=float(intercept),
                             r2=float(r2), n=len(d), bin_edges_km=edges,
                             percentile_front_bc=fronts)


def two_point_fit(distances_km, ages_bc, center_age_bc: float):
    """Exact line through two records; r^2 = 1 by construction."""
    d = np.asarray(distances_km, dtype=float)
    lag = center_age_bc - np.asarray(ages_bc, dtype=float)
    if len(d) != 2 or lag[0] == lag[1]:
        raise DegenerateDataError("two distinct lags required")
    slope = (d[1] - d[0]) / (lag[1] - lag[0])
    return slope, d[0] - slope * lag[0]


def broaden_timing(year_bc: float, area_km2: float, grid_years_bc,
                   beta: float = 0.5, v_ref: float = 1.0) -> np.ndarray:
    """Gaussian broadening of a simulated transition over an age grid.

    The width sigma_b = beta * sqrt(area) / v_ref converts the region's
    spatial extent into a temporal smear at the reference front speed.
    Returns a density over the (uniformly spaced) grid that sums to 1;
    beta = 0 degenerates to all mass in the nearest bin.
    """
    if area_km2 <= 0:
        raise ValueError("region area must be positive")
    grid = np.asarray(grid_years_bc, dtype=float)
    sigma = beta * math.sqrt(area_km2) / v_ref
    if sigma == 0:
        dens = np.zeros(len(grid))
        dens[int(np.argmin(np.abs(grid - year_bc)))] = 1.0
        return dens
    z = (grid - year_bc) / sigma
    dens = np.exp(-0.5 * z * z)
    total = dens.sum()
    if total == 0:
        raise ValueError("age grid does not cover the broadened transition")
    return dens / total


@dataclass
class FocusHistogram:
    bin_edges_bc: np.ndarray
    counts: np.ndarray
    model_density: np.ndarray | None


def focus_histogram(sites, center_lon: float, center_lat: float,
                    bin_width: float, *, radius_km: float = 200.0,
                    age_range_bc: tuple[float, float] | None = None,
                    member_boxes=None,
                    sim_year_bc: float | None = None,
                    area_km2: float | None = None,
                    beta: float = 0.5, v_ref: float = 1.0) -> FocusHistogram:
    """Histogram of site ages near a focus region, optionally overlaid with
    the broadened simulated transition.

    A site is selected when it lies within ``radius_km`` of the region
    centre or inside one of the region's member-cell boxes
    ((lon_min, lon_max, lat_min, lat_max) tuples).
    """
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    ages = []
    for s in sites:
        inside = great_circle_km(s.lon, s.lat, center_lon, center_lat) <= radius_km
        if not inside and member_boxes is not None:
            inside = any(lo0 <= s.lon <= lo1 and la0 <= s.lat <= la1
                         for lo0, lo1, la0, la1 in member_boxes)
        if inside:
            ages.append(s.median_bc)
    if age_range_bc is None:
        if ages:
            lo, hi = min(ages), max(ages)
        elif sim_year_bc is not None:
            lo = hi = sim_year_bc
        else:
            lo, hi = 0.0, bin_width
        lo = math.floor(lo / bin_width) * bin_width - bin_width
        hi = math.ceil(hi / bin_width) * bin_width + bin_width
    else:
        lo, hi = age_range_bc
    edges = np.arange(lo, hi + bin_width, bin_width)
    counts, _ = np.histogram(ages, bins=edges)
    model = None
    if sim_year_bc is not None and area_km2 is not None:
        centers = 0.5 * (edges[:-1] + edges[1:])
        model = broaden_timing(sim_year_bc, area_km2, centers, beta, v_ref)
    return FocusHistogram(bin_edges_bc=edges, counts=counts, model_density=model)


def immigrant_map(transitions) -> tuple[dict[int, float], list[int]]:
    """Per-region immigrant fraction at 90%-completion.

    Returns (fractions keyed by region, regions excluded for never reaching
    90% are simply absent and listed by the caller)."""
    return {rec.region: rec.immigrant_fraction for rec in transitions}, \
        [rec.region for rec in transitions]


def _fmt(x) -> str:
    return f"{x:.10g}"


def write_lagdist(result: LagDistanceResult, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["slope_km_per_a", "intercept_km", "r2", "n"])
        wr.writerow([_fmt(result.slope), _fmt(result.intercept),
                     _fmt(result.r2), result.n])
        wr.writerow([])
        wr.writerow(["bin_lo_km", "bin_hi_km", "p05_earliest_bc"])
        for b in range(len(result.bin_edges_km) - 1):
            front = result.percentile_front_bc[b]
            wr.writerow([_fmt(result.bin_edges_km[b]),
                         _fmt(result.bin_edges_km[b + 1]),
                         "" if np.isnan(front) else _fmt(front)])


def write_histogram(hist: FocusHistogram, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["bin_lo_bc", "bin_hi_bc", "count", "model_density"])
        for b in range(len(hist.counts)):
            model = "" if hist.model_density is None else _fmt(hist.model_density[b])
            wr.writerow([_fmt(hist.bin_edges_bc[b]), _fmt(hist.bin_edges_bc[b + 1]),
                         int(hist.counts[b]), model])


def write_immigrant_map(fractions: dict[int, float], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["region", "immigrant_fraction"])
        for region in sorted(fractions):
            wr.writerow([region, _fmt(fractions[region])])
