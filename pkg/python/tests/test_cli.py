"""
Command-line and output tests: subcommands, exit codes, CSV and gnuplot
files, and the run manifest.
"""

import json
import pytest
import numpy as np
import pandas as pd
from pathlib import Path

# Add the python directory to the path
import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

import ringberry
from ringberry.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main, resolve_threads, run_scenario
from ringberry.config import parse_config, parse_config_text
from ringberry.core import RB87, ConfigError, LocusVanishedError
from ringberry.geometric_phase import sagnac_phase
from ringberry.utils import emit_plot_data, file_sha256, save_table

EXAMPLE = str(Path(ringberry.__file__).parent / "data" / "example_tort.cfg")

STATIC_RING = """
[field]
B2 = 7800 G/cm2
L = 0.1 cm
l = {l} cm
mode = static_azimuthal_bias
bias_wire_current = 2 A

[atom]
species = 87Rb

[output]
formats = csv
"""


@pytest.fixture
def static_ring(tmp_path):
    path = tmp_path / "ring.cfg"
    path.write_text(STATIC_RING.format(l=0.05))
    return str(path)


class TestOutputFiles:
    """CSV tables and gnuplot blocks."""

    def test_failed_cells_are_empty(self, tmp_path):
        path = save_table(pd.DataFrame({"x": [1.0, 2.0], "y": [0.5, np.nan]}),
                          str(tmp_path / "t.csv"))
        assert Path(path).read_text().splitlines() == ["x,y", "1,0.5", "2,"]

    def test_gnuplot_blocks(self, tmp_path):
        table = pd.DataFrame({"series": [0.0, 0.0, 1.0], "x": [0.1, 0.2, 0.1],
                              "y": [1.0, np.nan, 3.0]})
        path = emit_plot_data(table, str(tmp_path / "t.dat"), "gnuplot-block", series="series")
        text = Path(path).read_text()
        blocks = text.strip("\n").split("\n\n\n")
        assert len(blocks) == 2
        assert blocks[0].splitlines()[0] == "# series = 0"
        assert blocks[0].splitlines()[1] == "# x y"
        assert blocks[0].splitlines()[3] == "0.2 ?"

    def test_empty_table(self, tmp_path):
        with pytest.raises(ConfigError):
            emit_plot_data(pd.DataFrame(), str(tmp_path / "t.dat"))

    def test_unknown_style(self, tmp_path):
        with pytest.raises(ValueError):
            emit_plot_data(pd.DataFrame({"x": [1.0]}), str(tmp_path / "t.dat"), "svg")


class TestSubcommands:
    """Scenario subcommands run through run_scenario."""

    def test_sagnac(self, tmp_path):
        files = run_scenario(parse_config(EXAMPLE), "sagnac", str(tmp_path))
        names = [Path(f).name for f in files]
        assert names == ["sagnac.csv", "sagnac.dat", "run_manifest.json"]
        row = pd.read_csv(tmp_path / "sagnac.csv").iloc[0]
        assert row["sagnac_phase_rad"] == pytest.approx(sagnac_phase(RB87.mass, 7.292e-5, 0.12, 0.0),
                                                        rel=1e-10)
        assert row["area_form_rad"] == pytest.approx(row["sagnac_phase_rad"], rel=1e-10)

    def test_manifest(self, tmp_path):
        cfg = parse_config(EXAMPLE)
        run_scenario(cfg, "sagnac", str(tmp_path), seed=11)
        manifest = json.loads((tmp_path / "run_manifest.json").read_text())
        assert manifest["status"] == "ok"
        assert manifest["seed"] == 11
        assert manifest["config_sha256"] == cfg.digest
        assert manifest["files"]["sagnac.csv"] == file_sha256(str(tmp_path / "sagnac.csv"))
        assert manifest["versions"]["ringberry"] == ringberry.__version__

    def test_coils(self, tmp_path):
        run_scenario(parse_config(EXAMPLE), "coils", str(tmp_path))
        row = pd.read_csv(tmp_path / "coils.csv").iloc[0]
        assert row["B1_G_per_cm"] == pytest.approx(780.0, rel=0.05)
        assert "within_tolerance" in row.index

    def test_zero_locus_rows_carry_error(self, tmp_path):
        run_scenario(parse_config(EXAMPLE), "trap", str(tmp_path))
        locus = pd.read_csv(tmp_path / "zero_locus.csv")
        assert list(locus.columns) == ["t_s", "rho0_cm", "z0_cm", "winding", "error"]
        failed = locus["error"].notna()
        assert set(locus.loc[failed, "error"]) <= {"no-zero-exists", "locus-vanished"}
        assert locus.loc[failed, "rho0_cm"].isna().all()
        assert locus.loc[~failed, "rho0_cm"].notna().all()

    def test_phase_on_static_ring(self, static_ring, tmp_path):
        run_scenario(parse_config(static_ring), "phase", str(tmp_path))
        row = pd.read_csv(tmp_path / "phase.csv").iloc[0]
        assert row["gamma_C_rad"] == pytest.approx(0.0, abs=1e-8)
        spectrum = pd.read_csv(tmp_path / "spectrum.csv")
        assert list(spectrum["n"]) == list(range(1, 9))

    def test_failure_writes_manifest(self, tmp_path):
        cfg = parse_config_text(STATIC_RING.format(l=0.2))
        with pytest.raises(LocusVanishedError):
            run_scenario(cfg, "trap", str(tmp_path))
        manifest = json.loads((tmp_path / "run_manifest.json").read_text())
        assert manifest["status"] == "failed"
        assert manifest["error"] == "locus-vanished"

    def test_unknown_subcommand(self, tmp_path):
        with pytest.raises(ConfigError):
            run_scenario(parse_config(EXAMPLE), "plot", str(tmp_path))


class TestMain:
    """Exit codes and environment handling."""

    def test_success(self, tmp_path, capsys):
        code = main(["sagnac", "--config", EXAMPLE, "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        assert "Sagnac phase" in capsys.readouterr().out

    def test_missing_config(self, tmp_path, capsys):
        code = main(["trap", "--config", str(tmp_path / "absent.cfg")])
        assert code == EXIT_CONFIG
        assert "Configuration error" in capsys.readouterr().err

    def test_numerical_failure(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text(STATIC_RING.format(l=0.2))
        code = main(["trap", "--config", str(path), "--out", str(tmp_path / "out")])
        assert code == EXIT_NUMERICAL
        assert "locus-vanished" in capsys.readouterr().err

    def test_unknown_subcommand_exits(self):
        with pytest.raises(SystemExit):
            main(["plot", "--config", EXAMPLE])

    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv("RINGBERRY_THREADS", "4")
        assert resolve_threads(None) == 4
        assert resolve_threads(2) == 2
        monkeypatch.setenv("RINGBERRY_THREADS", "many")
        with pytest.raises(ConfigError):
            resolve_threads(None)
