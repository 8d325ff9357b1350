"""Command line interface.

One executable, four subcommands: ``build-regions``, ``run``, ``analyze``
and ``pipeline`` (which chains the other three).  Exit codes: 0 success,
2 input error, 3 numerical abort, 4 data-quality failure.  Logs go to
stderr; stdout carries only the summary line of each subcommand.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, engine, plots
from .climate import load_cell_grid, load_anomalies, region_potentials
from .config import ConfigError, build_params, build_scenario, merged_config
from .engine import EngineError
from .regions import RegionGraph, build_regions, read_region_files, write_region_files

log = logging.getLogger("neospread")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_DATA = 4


class DataQualityError(RuntimeError):
    pass


def _common_args(sub):
    sub.add_argument("--config", help="configuration file (section.key = value)")
    sub.add_argument("--threads", type=int, default=None,
                     help="cap BLAS worker threads")
    sub.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                     help="config overrides, e.g. scenario.mode=demic-only")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neospread",
        description="Regional simulator of the Neolithic transition")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("build-regions", cmd_build_regions), ("run", cmd_run),
                     ("analyze", cmd_analyze), ("pipeline", cmd_pipeline)):
        sub = subs.add_parser(name)
        _common_args(sub)
        sub.set_defaults(func=fn)
    return parser


def _outdir(cfg) -> Path:
    out = Path(str(cfg.get("paths.output", ".")))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_grid(cfg):
    path = cfg.get("paths.cells")
    if path is None:
        raise ConfigError("paths.cells is required")
    return load_cell_grid(path, cell_deg=float(cfg["regions.cell_deg"]))


def cmd_build_regions(cfg) -> str:
    grid = _load_grid(cfg)
    result = build_regions(
        grid, a_t=float(cfg["regions.a_t"]),
        npp_scale=cfg.get("regions.npp_scale"),
        gdd_scale=cfg.get("regions.gdd_scale"),
        connectivity=int(cfg["regions.connectivity"]),
        max_iter=int(cfg["regions.max_iter"]))
    if not result.converged:
        log.warning("clustering did not converge within %d iterations",
                    int(cfg["regions.max_iter"]))
    graph = RegionGraph.from_labels(result.labels, grid)
    out = _outdir(cfg)
    write_region_files(graph, out / "regions.csv", out / "edges.csv")
    log.info("wrote %s and %s", out / "regions.csv", out / "edges.csv")
    return f"regions={graph.n} mean_area_km2={graph.areas.mean():.1f}"


def _membership(graph: RegionGraph, n_cells: int) -> np.ndarray:
    labels = np.full(n_cells, -1, dtype=int)
    for region, cells in enumerate(graph.cell_of_region):
        labels[cells] = region
    if np.any(labels < 0):
        raise ConfigError("region files do not cover every raster cell")
    return labels


def _region_continents(cfg, grid, graph, labels):
    if cfg.get("paths.continents") is None or graph.cell_of_region is None:
        return None
    import csv as _csv
    key = {}
    with open(cfg["paths.continents"], newline="") as fh:
        for row in _csv.DictReader(fh):
            key[(round(float(row["lon"]), 4), round(float(row["lat"]), 4))] = row["continent"]
    cell_cont = np.array([key.get((round(lo, 4), round(la, 4)), "0")
                          for lo, la in zip(grid.lon, grid.lat)])
    out = []
    for cells in graph.cell_of_region:
        vals, counts = np.unique(cell_cont[cells], return_counts=True)
        out.append(vals[np.argmax(counts)])
    return np.array(out)


def cmd_run(cfg) -> str:
    out = _outdir(cfg)
    regions_path = cfg.get("paths.regions", out / "regions.csv")
    edges_path = cfg.get("paths.edges", out / "edges.csv")
    if not Path(regions_path).exists() or not Path(edges_path).exists():
        raise ConfigError(f"region files not found ({regions_path}); "
                          "run build-regions first")
    graph = read_region_files(regions_path, edges_path)
    grid = _load_grid(cfg)
    labels = _membership(graph, len(grid))
    params = build_params(cfg)
    scenario = build_scenario(cfg)
    continents = _region_continents(cfg, grid, graph, labels)
    anomalies = None
    if cfg.get("paths.anomalies") is not None:
        anomalies = load_anomalies(cfg["paths.anomalies"], grid)

    def potentials(year_bc: float):
        dt = dp = 0.0
        if anomalies is not None:
            dt, dp = anomalies.at(year_bc)
        return region_potentials(grid, labels, params, dt=dt, dp=dp,
                                 continent_of_region=continents)

    result = engine.run(scenario, graph, potentials, params)
    engine.write_trajectory(result, out / "trajectory.csv")
    engine.write_transitions(result, out / "transitions.csv")
    engine.write_ledger(result, out / "ledger.csv")
    log.info("wrote trajectory/transitions/ledger to %s", out)
    onsets = [rec.onset_bc for rec in result.transitions]
    mean_onset = f"{np.mean(onsets):.1f}" if onsets else "n/a"
    return (f"neolithic_regions={len(onsets)}/{graph.n} "
            f"mean_onset_bc={mean_onset}")


def _read_transitions(path):
    import csv as _csv
    records = []
    with open(path, newline="") as fh:
        for row in _csv.DictReader(fh):
            records.append(engine.TransitionRecord(
                region=int(row["region"]), onset_bc=float(row["onset_bc"]),
                t90_bc=float(row["t90_bc"]),
                immigrant_fraction=float(row["immigrant_fraction"]),
                q_final=float(row["q_final"])))
    return records


def cmd_analyze(cfg) -> str:
    out = _outdir(cfg)
    trans_path = out / "transitions.csv"
    if not trans_path.exists():
        raise ConfigError(f"{trans_path} not found; run the simulation first")
    transitions = _read_transitions(trans_path)
    if not transitions:
        raise ConfigError("no transitions recorded; nothing to analyze")
    regions_path = cfg.get("paths.regions", out / "regions.csv")
    edges_path = cfg.get("paths.edges", out / "edges.csv")
    graph = read_region_files(regions_path, edges_path)

    center_lon = float(cfg.get("analysis.center_lon", 35.5))
    center_lat = float(cfg.get("analysis.center_lat", 33.9))
    dists = analysis.great_circle_km(graph.centroids[:, 0], graph.centroids[:, 1],
                                     center_lon, center_lat)
    center_region = int(np.argmin(dists))
    onset = {rec.region: rec.onset_bc for rec in transitions}
    if "analysis.center_age_bc" in cfg:
        center_age = float(cfg["analysis.center_age_bc"])
    elif center_region in onset:
        center_age = onset[center_region]
    else:
        center_age = max(onset.values())
    model_d = np.array([dists[r] for r in sorted(onset)])
    model_age = np.array([onset[r] for r in sorted(onset)])
    result = analysis.lag_distance(model_d, model_age, center_age,
                                   bin_km=float(cfg["analysis.bin_km"]))
    analysis.write_lagdist(result, out / "lagdist.csv")

    figures = bool(cfg.get("output.figures", True))
    fmt = str(cfg.get("output.figure_format", "svg"))
    if figures:
        plots.lag_distance_plot(model_d, model_age, center_age, result,
                                out / f"lagdist.{fmt}")

    fractions = {rec.region: rec.immigrant_fraction for rec in transitions}
    analysis.write_immigrant_map(fractions, out / "immigrant_fraction.csv")

    grid = labels = None
    if cfg.get("paths.cells") is not None and graph.cell_of_region is not None \
            and any(len(c) for c in graph.cell_of_region):
        grid = _load_grid(cfg)
        labels = _membership(graph, len(grid))
    if figures:
        if grid is not None:
            plots.timing_map(grid, labels, onset, out / f"timing_map.{fmt}")
            plots.immigrant_fraction_map(grid, labels, fractions,
                                         out / f"immigrant_map.{fmt}")
        else:
            plots.immigrant_fraction_bars(fractions, out / f"immigrant_map.{fmt}")

    sites_summary = ""
    if cfg.get("paths.sites") is not None:
        sites, skipped = analysis.load_sites(cfg["paths.sites"])
        total = len(sites) + skipped
        if total and skipped / total > 0.10:
            raise DataQualityError(
                f"{skipped}/{total} malformed site rows (>10%)")
        if skipped:
            log.warning("skipped %d malformed site rows", skipped)
        if sites:
            site_d = analysis.great_circle_km(
                np.array([s.lon for s in sites]), np.array([s.lat for s in sites]),
                center_lon, center_lat)
            site_age = np.array([s.median_bc for s in sites])
            near = site_d <= float(cfg["analysis.radius_km"])
            data_center_age = float(site_age[near].max()) if near.any() \
                else float(site_age.max())
            site_res = analysis.lag_distance(site_d, site_age, data_center_age,
                                             bin_km=float(cfg["analysis.bin_km"]))
            analysis.write_lagdist(site_res, out / "lagdist_sites.csv")
            if figures:
                plots.lag_distance_plot(site_d, site_age, data_center_age,
                                        site_res, out / f"lagdist_sites.{fmt}",
                                        label="sites")
            sites_summary = f" site_slope={site_res.slope:.3f}"
            _focus_histograms(cfg, out, sites, graph, transitions, figures, fmt)
    return f"slope={result.slope:.3f} r2={result.r2:.3f} n={result.n}{sites_summary}"


def _focus_histograms(cfg, out, sites, graph, transitions, figures, fmt):
    raw = cfg.get("analysis.focus_regions")
    if not raw:
        return
    onset = {rec.region: rec.onset_bc for rec in transitions}
    for token in str(raw).replace(";", ",").split(","):
        region = int(token)
        lon, lat = graph.centroids[region]
        hist = analysis.focus_histogram(
            sites, lon, lat, bin_width=float(cfg["analysis.bin_width_a"]),
            radius_km=float(cfg["analysis.radius_km"]),
            sim_year_bc=onset.get(region), area_km2=float(graph.areas[region]),
            beta=float(cfg["analysis.beta"]), v_ref=float(cfg["analysis.v_ref"]))
        analysis.write_histogram(hist, out / f"histogram_region{region}.csv")
        if figures:
            plots.focus_histogram_plot(hist, out / f"histogram_region{region}.{fmt}",
                                       title=f"region {region}")


def cmd_pipeline(cfg) -> str:
    parts = [cmd_build_regions(cfg), cmd_run(cfg), cmd_analyze(cfg)]
    return " | ".join(parts)


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    args = make_parser().parse_args(argv)
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        cfg = merged_config(args.config, args.overrides)
        summary = args.func(cfg)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except EngineError as exc:
        log.error("numerical abort: %s (state: %s)", exc, exc.state)
        return EXIT_NUMERIC
    except DataQualityError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
