"""
Scenario configuration tests.
"""

import pytest
import numpy as np
from pathlib import Path

# Add the python directory to the path
import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

import ringberry
from ringberry.config import format_config, parse_config, parse_config_text, parse_quantity
from ringberry.core import RB87, ConfigError
from ringberry.field_model import TrapMode

EXAMPLE = Path(ringberry.__file__).parent / "data" / "example_tort.cfg"

MINIMAL = """
[field]
B2 = 7800 G/cm2
L = 1 mm
l = 0.05 cm
drive_frequency = 5 kHz

[atom]
species = 87Rb

[output]
directory = out
"""


class TestQuantities:
    """Unit suffixes and conversion to stored units."""

    @pytest.mark.parametrize("text, dimension, expected", [
        ("1 mm", "length", 0.1),
        ("5 kHz", "angular_frequency", 2 * np.pi * 5e3),
        ("90 deg", "angle", np.pi / 2),
        ("250 us", "time", 2.5e-4),
        ("3", None, 3.0),
    ])
    def test_conversion(self, text, dimension, expected):
        assert parse_quantity(text, dimension) == pytest.approx(expected)

    def test_missing_unit(self):
        with pytest.raises(ValueError, match="missing unit"):
            parse_quantity("0.1", "length")

    def test_wrong_dimension(self):
        with pytest.raises(ValueError, match="not a length unit"):
            parse_quantity("0.1 G", "length")


class TestParsing:
    """Parsing and validation of scenario text."""

    def test_minimal_scenario(self):
        cfg = parse_config_text(MINIMAL)
        assert cfg.field.L == pytest.approx(0.1)
        assert cfg.field.drive_frequency == pytest.approx(2 * np.pi * 5e3)
        assert cfg.output.directory == "out"
        assert cfg.atom_preset() == RB87
        assert cfg.digest is not None and len(cfg.digest) == 64

    def test_waveform_from_config(self):
        w = parse_config_text(MINIMAL).waveform()
        assert w.mode is TrapMode.TORT
        assert w.B2 == 7800.0
        assert w.l == pytest.approx(0.05)

    def test_bundled_example(self):
        cfg = parse_config(str(EXAMPLE))
        assert cfg.field.B2 == 7800.0
        assert cfg.field.n == pytest.approx(0.1)
        assert len(cfg.coils.entries) == 3
        assert len(cfg.coil_set().coils) == 6
        assert cfg.analysis.series == (0.0, 0.75, 1.0)
        assert cfg.analysis.ring_radius == pytest.approx(0.12)
        assert cfg.dynamics.v0 == pytest.approx(20.0)
        assert cfg.output.formats == ("csv", "gnuplot")
        assert cfg.path == str(EXAMPLE)

    def test_round_trip(self):
        cfg = parse_config(str(EXAMPLE))
        assert parse_config_text(format_config(cfg)) == cfg

    def test_every_error_is_reported(self):
        text = MINIMAL.replace("[atom]\nspecies = 87Rb\n", "") + "\n[field]\nwidth = 3\nL = 0.1\n"
        with pytest.raises(ConfigError) as info:
            parse_config_text(text, "broken.cfg")
        messages = info.value.messages
        assert any("section [field] repeated" in m for m in messages)
        assert any("unknown key 'width'" in m for m in messages)
        assert any("missing unit" in m for m in messages)
        assert any("missing sections: [atom]" in m for m in messages)
        assert all(m.startswith("line ") for m in messages if "missing sections" not in m)
        assert "broken.cfg" in str(info.value)

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="L set twice"):
            parse_config_text(MINIMAL.replace("L = 1 mm", "L = 1 mm\nL = 2 mm"))

    @pytest.mark.parametrize("section, line", [
        ("[field]", "b1_phase = tan"),
        ("[analysis]", "sampler = sobol"),
        ("[analysis]", "sweep_parameter = B2"),
        ("[dynamics]", "gauge = strong"),
        ("[output]", "formats = csv, hdf5"),
    ])
    def test_invalid_values(self, section, line):
        if section in MINIMAL:
            text = MINIMAL.replace(section, f"{section}\n{line}")
        else:
            text = MINIMAL + f"\n{section}\n{line}\n"
        with pytest.raises(ConfigError):
            parse_config_text(text)

    def test_dynamics_in_ring_units(self):
        cfg = parse_config_text(MINIMAL + "\n[dynamics]\ndt = 1e-4 ring\nv0 = 15 ring\n")
        assert cfg.dynamics.dt == pytest.approx(1e-4)
        assert cfg.dynamics.v0 == pytest.approx(15.0)
        assert parse_config_text(format_config(cfg)) == cfg

    @pytest.mark.parametrize("line", ["v0 = 20", "dt = 1e-4", "dt = 1e-4 s"])
    def test_dynamics_needs_ring_unit(self, line):
        with pytest.raises(ConfigError, match="missing unit|not a ring_"):
            parse_config_text(MINIMAL + f"\n[dynamics]\n{line}\n")

    def test_coil_source_needs_coils(self):
        with pytest.raises(ConfigError, match="coil entry"):
            parse_config_text(MINIMAL.replace("[field]", "[field]\nsource = coils"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(str(tmp_path / "absent.cfg"))
