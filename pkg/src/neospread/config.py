"""Flat ``section.key = value`` configuration files with CLI overrides.

Unknown keys are rejected; precedence is CLI override > config file >
defaults.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .params import MODES, ParameterSet, Scenario


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


_PARAM_KEYS = {f"params.{f.name}": (bool if f.name == "exchange_q" else float)
               for f in dataclasses.fields(ParameterSet)}

KNOWN_KEYS: dict[str, type | None] = {
    **_PARAM_KEYS,
    "scenario.mode": str,
    "scenario.start_year": float,
    "scenario.end_year": float,
    "scenario.dt": float,
    "scenario.output_interval": float,
    "scenario.climate_interval": float,
    "scenario.guard_fraction": float,
    "scenario.t90_mode": str,
    "scenario.seed_region": int,
    "scenario.seed_t": float,
    "paths.cells": str,
    "paths.anomalies": str,
    "paths.continents": str,
    "paths.sites": str,
    "paths.regions": str,
    "paths.edges": str,
    "paths.output": str,
    "regions.a_t": float,
    "regions.npp_scale": float,
    "regions.gdd_scale": float,
    "regions.connectivity": int,
    "regions.max_iter": int,
    "regions.cell_deg": float,
    "analysis.center_lon": float,
    "analysis.center_lat": float,
    "analysis.center_age_bc": float,
    "analysis.bin_km": float,
    "analysis.bin_width_a": float,
    "analysis.radius_km": float,
    "analysis.beta": float,
    "analysis.v_ref": float,
    "analysis.focus_regions": str,
    "output.figures": _bool,
    "output.figure_format": str,
}

DEFAULTS: dict[str, object] = {
    "scenario.mode": "mixed",
    "regions.a_t": 130e3,
    "regions.connectivity": 4,
    "regions.max_iter": 100,
    "regions.cell_deg": 0.5,
    "analysis.bin_km": 500.0,
    "analysis.bin_width_a": 100.0,
    "analysis.radius_km": 200.0,
    "analysis.beta": 0.5,
    "analysis.v_ref": 1.0,
    "output.figures": True,
    "output.figure_format": "svg",
}


def parse_assignment(line: str) -> tuple[str, object]:
    if "=" not in line:
        raise ConfigError(f"expected key=value, got {line!r}")
    key, _, raw = line.partition("=")
    key = key.strip()
    raw = raw.strip()
    if key not in KNOWN_KEYS:
        raise ConfigError(f"unknown configuration key {key!r}")
    conv = KNOWN_KEYS[key]
    try:
        return key, conv(raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc


def load_config(path) -> dict[str, object]:
    """Parse a config file; ``#`` starts a comment, blank lines are skipped."""
    cfg: dict[str, object] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        try:
            key, value = parse_assignment(body)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        cfg[key] = value
    return cfg


def merged_config(config_path=None, overrides=()) -> dict[str, object]:
    cfg = dict(DEFAULTS)
    if config_path is not None:
        cfg.update(load_config(config_path))
    for item in overrides:
        key, value = parse_assignment(item)
        cfg[key] = value
    _check_paths(cfg)
    return cfg


def _check_paths(cfg) -> None:
    for key, value in cfg.items():
        if key.startswith("paths.") and key != "paths.output":
            if not Path(str(value)).exists():
                raise ConfigError(f"{key}: path does not exist: {value}")


def build_params(cfg) -> ParameterSet:
    kwargs = {k.split(".", 1)[1]: v for k, v in cfg.items()
              if k.startswith("params.")}
    return ParameterSet(**kwargs)


def build_scenario(cfg) -> Scenario:
    kwargs = {k.split(".", 1)[1]: v for k, v in cfg.items()
              if k.startswith("scenario.")}
    mode = kwargs.get("mode", "mixed")
    if mode not in MODES:
        raise ConfigError(f"scenario.mode must be one of {MODES}")
    return Scenario(**kwargs)
