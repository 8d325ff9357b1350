import csv
import subprocess
import sys

import numpy as np
import pytest

from neospread.cli import (EXIT_DATA, EXIT_INPUT, EXIT_OK, main)
from neospread.config import (ConfigError, build_params, build_scenario,
                              load_config, merged_config, parse_assignment)


class TestConfigParsing:
    def test_parse_assignment_types(self):
        assert parse_assignment("params.mu = 0.005") == ("params.mu", 0.005)
        assert parse_assignment("scenario.mode=demic-only") == \
            ("scenario.mode", "demic-only")
        assert parse_assignment("output.figures=off") == ("output.figures", False)
        assert parse_assignment("scenario.seed_region=3") == \
            ("scenario.seed_region", 3)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            parse_assignment("params.bogus=1")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError):
            parse_assignment("params.mu=abc")
        with pytest.raises(ConfigError):
            parse_assignment("no-equals-sign")

    def test_load_config_comments(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(
            "# a comment\n"
            "params.mu = 0.005   # trailing comment\n"
            "\n"
            "scenario.dt = 10\n")
        cfg = load_config(cfg_file)
        assert cfg == {"params.mu": 0.005, "scenario.dt": 10.0}

    def test_load_config_reports_line(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("params.mu = 0.004\njunk.key = 1\n")
        with pytest.raises(ConfigError, match=":2:"):
            load_config(cfg_file)

    def test_precedence(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("scenario.dt = 10\nparams.mu = 0.005\n")
        cfg = merged_config(cfg_file, ["scenario.dt=2.5"])
        assert cfg["scenario.dt"] == 2.5          # override beats file
        assert cfg["params.mu"] == 0.005          # file beats defaults
        assert cfg["analysis.bin_km"] == 500.0    # default survives

    def test_missing_path_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist"):
            merged_config(None, ["paths.cells=/nonexistent/cells.csv"])

    def test_build_params_and_scenario(self):
        cfg = merged_config(None, ["params.mu=0.006", "scenario.mode=no-exchange",
                                   "scenario.seed_region=2"])
        p = build_params(cfg)
        assert p.mu == 0.006
        s = build_scenario(cfg)
        assert s.mode == "no-exchange"
        assert s.seed_region == 2


@pytest.fixture
def raster(tmp_path):
    """Synthetic west-east raster of four moisture stripes; clustering turns
    each stripe into one region, giving a small corridor for the CLI runs."""
    path = tmp_path / "cells.csv"
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["lon", "lat", "t", "p"])
        for i in range(16):
            for j in range(4):
                wr.writerow([20.0 + 0.5 * i, 35.0 + 0.5 * j,
                             18.0, 0.8 - 0.15 * (i // 4)])
    return path


def run_cli(args):
    return main(list(args))


class TestCli:
    def test_build_regions(self, raster, tmp_path, capsys):
        code = run_cli(["build-regions", f"paths.cells={raster}",
                        f"paths.output={tmp_path}", "regions.a_t=3000", "regions.npp_scale=30"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("regions=")
        assert (tmp_path / "regions.csv").exists()
        assert (tmp_path / "edges.csv").exists()

    def test_pipeline_end_to_end(self, raster, tmp_path, capsys):
        code = run_cli(["pipeline", f"paths.cells={raster}",
                        f"paths.output={tmp_path}", "regions.a_t=3000", "regions.npp_scale=30",
                        "scenario.seed_region=0", "scenario.seed_t=16",
                        "scenario.start_year=9500", "scenario.end_year=4500",
                        "scenario.dt=1",
                        "analysis.center_lon=20.0", "analysis.center_lat=35.0"])
        assert code == EXIT_OK
        summary = capsys.readouterr().out
        assert "slope=" in summary
        for name in ("trajectory.csv", "transitions.csv", "ledger.csv",
                     "lagdist.csv", "immigrant_fraction.csv",
                     "lagdist.svg", "timing_map.svg", "immigrant_map.svg"):
            assert (tmp_path / name).exists(), name

    def test_figures_can_be_disabled(self, raster, tmp_path, capsys):
        code = run_cli(["pipeline", f"paths.cells={raster}",
                        f"paths.output={tmp_path}", "regions.a_t=3000", "regions.npp_scale=30",
                        "scenario.seed_region=0", "scenario.seed_t=16",
                        "scenario.start_year=9500", "scenario.end_year=4500",
                        "scenario.dt=1",
                        "analysis.center_lon=20.0", "analysis.center_lat=35.0",
                        "output.figures=off"])
        assert code == EXIT_OK
        assert not (tmp_path / "lagdist.svg").exists()

    def test_input_error_exit_code(self, tmp_path, capsys):
        code = run_cli(["run", f"paths.output={tmp_path}"])
        assert code == EXIT_INPUT
        assert capsys.readouterr().out == ""   # nothing on stdout on failure

    def test_unknown_key_exit_code(self, capsys):
        assert run_cli(["run", "bogus.key=1"]) == EXIT_INPUT

    def test_data_quality_exit_code(self, raster, tmp_path, capsys):
        sites = tmp_path / "sites.csv"
        with open(sites, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["id", "lon", "lat", "median_calBC", "sigma", "culture"])
            wr.writerow(["a", 20.0, 35.0, 7000, 100, ""])
            for k in range(5):
                wr.writerow([f"bad{k}", "x", 35.0, 7000, 100, ""])
        base = ["paths.cells=" + str(raster), f"paths.output={tmp_path}",
                "regions.a_t=3000", "regions.npp_scale=30", "scenario.seed_region=0",
                "scenario.seed_t=16", "scenario.start_year=9500",
                "scenario.end_year=4500", "scenario.dt=1", "analysis.center_lon=20.0",
                "analysis.center_lat=35.0", "output.figures=off"]
        assert run_cli(["build-regions"] + base) == EXIT_OK
        assert run_cli(["run"] + base) == EXIT_OK
        code = run_cli(["analyze", f"paths.sites={sites}"] + base)
        assert code == EXIT_DATA

    def test_sites_analysis(self, raster, tmp_path, capsys):
        # well-formed sites produce the site-side regression and histograms
        sites = tmp_path / "sites.csv"
        rng = np.random.default_rng(1)
        with open(sites, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["id", "lon", "lat", "median_calBC", "sigma", "culture"])
            for k in range(30):
                lon = 20.0 + 0.5 * rng.uniform(0, 7)
                lat = 35.0 + 0.5 * rng.uniform(0, 3)
                d = 111.0 * (lon - 20.0)
                wr.writerow([f"s{k}", lon, lat, 7000.0 - d / 1.0, 100, ""])
        base = ["paths.cells=" + str(raster), f"paths.output={tmp_path}",
                "regions.a_t=3000", "regions.npp_scale=30", "scenario.seed_region=0",
                "scenario.seed_t=16", "scenario.start_year=9500",
                "scenario.end_year=4500", "scenario.dt=1", "analysis.center_lon=20.0",
                "analysis.center_lat=35.0", "analysis.focus_regions=0",
                "output.figures=off"]
        assert run_cli(["build-regions"] + base) == EXIT_OK
        assert run_cli(["run"] + base) == EXIT_OK
        assert run_cli(["analyze", f"paths.sites={sites}"] + base) == EXIT_OK
        summary = capsys.readouterr().out.splitlines()[-1]
        assert "site_slope=" in summary
        assert (tmp_path / "lagdist_sites.csv").exists()
        assert (tmp_path / "histogram_region0.csv").exists()


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "neospread.cli", "--help"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "build-regions" in out.stdout
