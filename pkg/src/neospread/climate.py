"""Climate-to-potential transfer functions and gridded climate handling.

Converts temperature/precipitation fields into net primary productivity
(Miami transfer), a temperature limitation index, the food extraction
potential, and the local/continental potential for agropastoral economies.
All transfer functions are pure and vectorize over numpy arrays.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

NPP_MAX = 1460.0        # asymptotic NPP of the Miami transfer, g m^-2 a^-1
EARTH_RADIUS_KM = 6371.0
KM_PER_DEG = np.pi * EARTH_RADIUS_KM / 180.0


def miami_npp(t, p):
    """Net primary productivity (g m^-2 a^-1) from the Miami transfer.

    ``t`` is mean annual temperature in deg C, ``p`` annual precipitation
    in meters.  Returns min(NPP_p, NPP_t); bounded by [0, 1460).
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("precipitation must be nonnegative")
    npp_p = (1.0 - np.exp(-0.664 * p)) * NPP_MAX
    npp_t = NPP_MAX / (1.0 + 3.7248 * np.exp(-0.119 * t))
    return np.minimum(npp_p, npp_t)


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def temperature_limitation(gdd, gdd_ref: float = 1500.0):
    """Temperature limitation index in [0, 1].

    Zero under permafrost (no growing degree days), one for gdd >= gdd_ref.
    The ramp between them is a smoothstep; no closed form is prescribed by
    the underlying model, only the two limits.
    """
    gdd = np.asarray(gdd, dtype=float)
    if np.any(gdd < 0):
        raise ValueError("growing degree days must be nonnegative")
    return smoothstep(gdd / gdd_ref)


def fep(npp, npp_f: float = 1100.0):
    """Food extraction potential: unimodal in NPP with maximum 1 at npp_f."""
    x = np.asarray(npp, dtype=float) / npp_f
    return 2.0 * x / (x * x + 1.0)


def lae(npp, tli, npp_n: float = 550.0):
    """Local potential for agropastoral economies.

    ``tli * 4x/(x^3+3)`` with x = npp/npp_n; equals tli at npp = npp_n.  The
    analytic maximum of the rational part sits at x = (3/2)^(1/3) with value
    ~1.018, slightly above the nominal peak.
    """
    x = np.asarray(npp, dtype=float) / npp_n
    return np.asarray(tli, dtype=float) * 4.0 * x / (x ** 3 + 3.0)


def continental_cae(areas, laes, continent_ids, cae_max: float,
                    a_max: float | None = None):
    """Per-continent agropastoral potential from a linearised species-area law.

    cae_k = cae_max / a_max * sum_{i in k} A_i * LAE_i.  ``a_max`` defaults
    to the total area of the largest continent.  Returns (cae_by_continent,
    pae_per_region) where pae_i = lae_i * cae of its continent.
    """
    areas = np.asarray(areas, dtype=float)
    laes = np.asarray(laes, dtype=float)
    continent_ids = np.asarray(continent_ids)
    if np.any(areas <= 0):
        raise ValueError("region areas must be positive")
    labels = np.unique(continent_ids)
    total_area = {k: float(areas[continent_ids == k].sum()) for k in labels}
    if a_max is None:
        a_max = max(total_area.values())
    cae = {}
    for k in labels:
        sel = continent_ids == k
        cae[k] = cae_max / a_max * float((areas[sel] * laes[sel]).sum())
    pae = laes * np.array([cae[k] for k in continent_ids])
    return cae, pae


_DAYS_PER_MONTH = np.array([31, 28.25, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31])


def gdd_from_monthly(monthly_t):
    """Growing degree days (base 0 deg C) from a 12-column monthly series."""
    monthly_t = np.asarray(monthly_t, dtype=float)
    return np.maximum(monthly_t, 0.0) @ _DAYS_PER_MONTH


def gdd_proxy(t_annual, days: float = 365.0):
    """Linear GDD proxy when only an annual mean temperature is available."""
    return np.maximum(np.asarray(t_annual, dtype=float), 0.0) * days


def cell_area_km2(lat, cell_deg: float):
    """Area of a cell_deg x cell_deg cell centered at latitude lat (km^2)."""
    lat = np.asarray(lat, dtype=float)
    half = np.radians(cell_deg / 2.0)
    band = np.sin(np.radians(lat) + half) - np.sin(np.radians(lat) - half)
    return EARTH_RADIUS_KM ** 2 * np.radians(cell_deg) * band


@dataclass
class CellGrid:
    """Column-oriented climate raster: one entry per land cell."""

    lon: np.ndarray
    lat: np.ndarray
    t: np.ndarray
    p: np.ndarray
    gdd: np.ndarray
    cell_deg: float = 0.5
    monthly_t: np.ndarray | None = None
    continent: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.lon)
        for name in ("lat", "t", "p", "gdd"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has mismatched length")

    def __len__(self) -> int:
        return len(self.lon)

    @property
    def area(self) -> np.ndarray:
        return cell_area_km2(self.lat, self.cell_deg)

    def npp(self, dt=0.0, dp=0.0) -> np.ndarray:
        return miami_npp(self.t + dt, np.maximum(self.p + dp, 0.0))

    def tli(self, gdd_ref: float = 1500.0) -> np.ndarray:
        return temperature_limitation(self.gdd, gdd_ref)


def load_cell_grid(path, cell_deg: float = 0.5, gdd_days: float = 365.0) -> CellGrid:
    """Read a cell raster CSV with columns lon,lat,t,p[,gdd][,t01..t12][,continent].

    GDD is taken from the ``gdd`` column if present, else from monthly
    temperatures ``t01..t12``, else from the annual-mean linear proxy.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty raster file")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no cells")
    cols = reader.fieldnames

    def col(name):
        return np.array([float(r[name]) for r in rows])

    lon, lat, t, p = col("lon"), col("lat"), col("t"), col("p")
    monthly = None
    month_cols = [f"t{m:02d}" for m in range(1, 13)]
    if all(c in cols for c in month_cols):
        monthly = np.column_stack([col(c) for c in month_cols])
    if "gdd" in cols:
        gdd = col("gdd")
    elif monthly is not None:
        gdd = gdd_from_monthly(monthly)
    else:
        gdd = gdd_proxy(t, gdd_days)
    continent = None
    if "continent" in cols:
        continent = np.array([r["continent"] for r in rows])
    return CellGrid(lon=lon, lat=lat, t=t, p=p, gdd=gdd, cell_deg=cell_deg,
                    monthly_t=monthly, continent=continent)


@dataclass
class AnomalySeries:
    """Per-year (delta t, delta p) anomaly slices aligned to a cell grid.

    Slices are keyed by sim BC year; lookups interpolate linearly between
    the bracketing slices and clamp outside the covered range.
    """

    years: np.ndarray                 # sim BC, descending order not required
    dt_slices: np.ndarray             # (n_years, n_cells)
    dp_slices: np.ndarray             # (n_years, n_cells)

    def __post_init__(self):
        order = np.argsort(self.years)
        self.years = np.asarray(self.years, dtype=float)[order]
        self.dt_slices = np.asarray(self.dt_slices, dtype=float)[order]
        self.dp_slices = np.asarray(self.dp_slices, dtype=float)[order]

    def at(self, year_bc: float):
        y = self.years
        if year_bc <= y[0]:
            return self.dt_slices[0], self.dp_slices[0]
        if year_bc >= y[-1]:
            return self.dt_slices[-1], self.dp_slices[-1]
        hi = int(np.searchsorted(y, year_bc))
        lo = hi - 1
        w = (year_bc - y[lo]) / (y[hi] - y[lo])
        return ((1 - w) * self.dt_slices[lo] + w * self.dt_slices[hi],
                (1 - w) * self.dp_slices[lo] + w * self.dp_slices[hi])


def load_anomalies(path, grid: CellGrid) -> AnomalySeries:
    """Read anomaly CSV (year,lon,lat,dt,dp) and align it to ``grid`` cells."""
    key = {(round(lo, 4), round(la, 4)): i
           for i, (lo, la) in enumerate(zip(grid.lon, grid.lat))}
    slices: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            year = float(row["year"])
            if year not in slices:
                slices[year] = (np.zeros(len(grid)), np.zeros(len(grid)))
            idx = key.get((round(float(row["lon"]), 4), round(float(row["lat"]), 4)))
            if idx is None:
                continue
            slices[year][0][idx] = float(row["dt"])
            slices[year][1][idx] = float(row["dp"])
    if not slices:
        raise ValueError(f"{path}: no anomaly slices")
    years = np.array(sorted(slices))
    return AnomalySeries(
        years=years,
        dt_slices=np.stack([slices[y][0] for y in years]),
        dp_slices=np.stack([slices[y][1] for y in years]),
    )


@dataclass
class Potentials:
    """Per-region potential fields consumed by the engine."""

    fep: np.ndarray
    tli: np.ndarray
    pae: np.ndarray
    lae: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.fep)


def region_potentials(grid: CellGrid, membership, params, dt=0.0, dp=0.0,
                      continent_of_region=None) -> Potentials:
    """Aggregate cell climate to region potentials.

    ``membership`` maps each cell to a region index 0..n-1.  Regional NPP and
    GDD are area-weighted means of member cells; the transfer functions are
    applied at the region scale.
    """
    membership = np.asarray(membership)
    n = int(membership.max()) + 1
    area = grid.area
    npp_c = grid.npp(dt, dp)
    w = np.bincount(membership, weights=area, minlength=n)
    npp_r = np.bincount(membership, weights=area * npp_c, minlength=n) / w
    gdd_r = np.bincount(membership, weights=area * grid.gdd, minlength=n) / w
    tli_r = temperature_limitation(gdd_r, params.gdd_ref)
    fep_r = fep(npp_r, params.npp_f)
    lae_r = lae(npp_r, tli_r, params.npp_n)
    if continent_of_region is None:
        continent_of_region = np.zeros(n, dtype=int)
    _, pae_r = continental_cae(w, lae_r, continent_of_region, params.cae_max)
    return Potentials(fep=fep_r, tli=tli_r, pae=pae_r, lae=lae_r)
