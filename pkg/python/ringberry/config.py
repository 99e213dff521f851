"""
Scenario configuration files.

A scenario is a sectioned ``key = value`` text file. Physical quantities
carry an explicit unit suffix and are stored internally in CGS units
(cm, G, s, g, A, rad); dimensionless keys take a bare number. Every
problem found is reported, each anchored to its line.

    [field]
    B2 = 7800 G/cm2
    L = 0.1 cm
    drive_frequency = 5 kHz
"""

import hashlib
import logging
import os
from dataclasses import dataclass, fields, replace
from dataclasses import field as dc_field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .core import AMU, ATOMS, RB87, Atom, ConfigError
from .field_model import Coil, CoilSet, FieldWaveform, TrapMode

logger = logging.getLogger(__name__)

# dimension -> accepted suffix -> factor to the stored unit
UNITS: Dict[str, Dict[str, float]] = {
    "field": {"G": 1.0},
    "gradient": {"G/cm": 1.0},
    "curvature": {"G/cm2": 1.0},
    "length": {"cm": 1.0, "mm": 0.1},
    "angular_frequency": {"rad/s": 1.0, "Hz": 2.0 * np.pi, "kHz": 2.0e3 * np.pi},
    "angular_velocity": {"rad/s": 1.0},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
    "current": {"A": 1.0},
    "angle": {"rad": 1.0, "deg": np.pi / 180.0},
    "mass": {"g": 1.0, "amu": AMU},
    # ring units: hbar = m = rho_c = 1
    "ring_time": {"ring": 1.0},
    "ring_angular_velocity": {"ring": 1.0},
}

# unit written back by format_config for each dimension
CANONICAL_UNIT = {"field": "G", "gradient": "G/cm", "curvature": "G/cm2", "length": "cm",
                  "angular_frequency": "rad/s", "angular_velocity": "rad/s", "time": "s",
                  "current": "A", "angle": "rad", "mass": "g",
                  "ring_time": "ring", "ring_angular_velocity": "ring"}

SECTIONS = ("field", "coils", "atom", "analysis", "dynamics", "output")
REQUIRED_SECTIONS = ("field", "atom", "output")


@dataclass(frozen=True)
class FieldSection:
    source: str = "waveform"
    B2: float = 0.0
    L: float = 0.0
    n: float = 0.0
    l: float = 0.0
    drive_frequency: float = 2.0 * np.pi * 5.0e3    # rad/s
    b1_phase: str = "cos"
    mode: str = TrapMode.TORT.value
    bias_wire_current: float = 0.0


@dataclass(frozen=True)
class CoilSection:
    # (kind, radius cm, axial position or half separation cm, current A)
    entries: Tuple[Tuple[str, float, float, float], ...] = ()
    fit_radius: float = 0.01


@dataclass(frozen=True)
class AtomSection:
    species: str = "87Rb"
    mass: Optional[float] = None
    g_F: Optional[float] = None
    m_F: Optional[int] = None


@dataclass(frozen=True)
class AnalysisSection:
    sweep_parameter: str = "l"
    grid: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    series: Tuple[float, ...] = (0.0,)
    deltas: Tuple[float, ...] = (0.001, 0.005, 0.015)
    sampler: str = "flat_grid"
    samples: int = 10000
    seed: int = 0
    n_max: int = 8
    winding: int = 1
    orbit_rate: float = 2.0 * np.pi * 10.0
    rotation_rate: float = 7.292e-5
    rotation_angle: float = 0.0
    ring_radius: Optional[float] = None


@dataclass(frozen=True)
class DynamicsSection:
    N: int = 2048
    dt: Optional[float] = None
    v0: float = 20.0
    width: float = 0.25
    gauge: str = "0.1"
    gauge_cos: float = 0.0
    reference_gauge: float = 0.0


@dataclass(frozen=True)
class OutputSection:
    directory: str = "results"
    formats: Tuple[str, ...] = ("csv",)


@dataclass(frozen=True)
class ScenarioConfig:
    field: FieldSection = dc_field(default_factory=FieldSection)
    coils: CoilSection = dc_field(default_factory=CoilSection)
    atom: AtomSection = dc_field(default_factory=AtomSection)
    analysis: AnalysisSection = dc_field(default_factory=AnalysisSection)
    dynamics: DynamicsSection = dc_field(default_factory=DynamicsSection)
    output: OutputSection = dc_field(default_factory=OutputSection)
    path: Optional[str] = dc_field(default=None, compare=False)
    digest: Optional[str] = dc_field(default=None, compare=False)

    def waveform(self, **changes) -> FieldWaveform:
        f = self.field
        w = FieldWaveform(B2=f.B2, L=f.L, n=f.n, l=f.l, omega=f.drive_frequency,
                          bias_wire_current=f.bias_wire_current, mode=TrapMode(f.mode),
                          b1_phase=f.b1_phase)
        return replace(w, **changes) if changes else w

    def coil_set(self) -> CoilSet:
        result = CoilSet()
        for kind, radius, position, current in self.coils.entries:
            if kind == "coil":
                result = result + CoilSet((Coil(radius, position, current),))
            elif kind == "helmholtz":
                result = result + CoilSet.helmholtz_pair(radius, position, current)
            else:
                result = result + CoilSet.anti_helmholtz_pair(radius, position, current)
        return result

    def atom_preset(self) -> Atom:
        a = self.atom
        base = ATOMS.get(a.species, RB87)
        return Atom(a.species,
                    base.mass if a.mass is None else a.mass,
                    base.g_F if a.g_F is None else a.g_F,
                    base.m_F if a.m_F is None else a.m_F)


# section -> key -> (dimension or None, value kind)
SCHEMA: Dict[str, Dict[str, Tuple[Optional[str], str]]] = {
    "field": {
        "source": (None, "str"), "B2": ("curvature", "number"), "L": ("length", "number"),
        "n": ("length", "number"), "l": ("length", "number"),
        "drive_frequency": ("angular_frequency", "number"), "b1_phase": (None, "str"),
        "mode": (None, "str"), "bias_wire_current": ("current", "number"),
    },
    "coils": {
        "coil": ("length", "coil"), "helmholtz": ("length", "coil"),
        "anti_helmholtz": ("length", "coil"), "fit_radius": ("length", "number"),
    },
    "atom": {
        "species": (None, "str"), "mass": ("mass", "number"), "g_F": (None, "number"),
        "m_F": (None, "int"),
    },
    "analysis": {
        "sweep_parameter": (None, "str"), "grid": (None, "list"), "series": (None, "list"),
        "deltas": (None, "list"), "sampler": (None, "str"), "samples": (None, "int"),
        "seed": (None, "int"), "n_max": (None, "int"), "winding": (None, "int"),
        "orbit_rate": ("angular_velocity", "number"),
        "rotation_rate": ("angular_velocity", "number"), "rotation_angle": ("angle", "number"),
        "ring_radius": ("length", "number"),
    },
    "dynamics": {
        "N": (None, "int"), "dt": ("ring_time", "number"),
        "v0": ("ring_angular_velocity", "number"),
        "width": ("angle", "number"), "gauge": (None, "str"), "gauge_cos": (None, "number"),
        "reference_gauge": (None, "number"),
    },
    "output": {"directory": (None, "str"), "formats": (None, "strlist")},
}

SECTION_TYPES = {"field": FieldSection, "coils": CoilSection, "atom": AtomSection,
                 "analysis": AnalysisSection, "dynamics": DynamicsSection, "output": OutputSection}


def parse_quantity(text: str, dimension: Optional[str]) -> float:
    """'7800 G/cm2' -> 7800.0 in the stored unit. Raises ValueError on a bad unit."""
    parts = text.split()
    if dimension is None:
        if len(parts) != 1:
            raise ValueError(f"expected a bare number, got {text!r}")
        return float(parts[0])
    if len(parts) != 2:
        allowed = ", ".join(UNITS[dimension])
        raise ValueError(f"missing unit in {text!r} (expected one of {allowed})")
    number, unit = parts
    if unit not in UNITS[dimension]:
        allowed = ", ".join(UNITS[dimension])
        raise ValueError(f"unit {unit!r} is not a {dimension} unit (expected one of {allowed})")
    return float(number) * UNITS[dimension][unit]


def _parse_value(key: str, raw: str, dimension: Optional[str], kind: str):
    if kind == "str":
        return raw
    if kind == "strlist":
        return tuple(item.strip() for item in raw.split(",") if item.strip())
    if kind == "int":
        value = float(raw)
        if value != int(value):
            raise ValueError(f"{key} must be an integer")
        return int(value)
    if kind == "list":
        return tuple(float(item) for item in raw.split(",") if item.strip())
    if kind == "coil":
        items = [item.strip() for item in raw.split(",")]
        if len(items) != 3:
            raise ValueError(f"{key} needs 'radius, position, current'")
        return (key, parse_quantity(items[0], "length"), parse_quantity(items[1], "length"),
                parse_quantity(items[2], "current"))
    return parse_quantity(raw, dimension)


def parse_config_text(text: str, path: Optional[str] = None) -> ScenarioConfig:
    """Parse scenario text; every error found is collected into one ConfigError."""
    errors: List[str] = []
    values: Dict[str, Dict[str, object]] = {}
    lines: Dict[str, int] = {}
    section = None

    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                errors.append(f"line {number}: unknown section [{section}]")
                section = None
                continue
            if section in values:
                errors.append(f"line {number}: section [{section}] repeated")
            values.setdefault(section, {})
            lines.setdefault(section, number)
            continue
        if "=" not in line:
            errors.append(f"line {number}: expected 'key = value'")
            continue
        if section is None:
            errors.append(f"line {number}: entry outside a known section")
            continue
        key, raw = (part.strip() for part in line.split("=", 1))
        schema = SCHEMA[section].get(key)
        if schema is None:
            errors.append(f"line {number}: unknown key {key!r} in [{section}]")
            continue
        try:
            value = _parse_value(key, raw, *schema)
        except ValueError as exc:
            errors.append(f"line {number}: {key}: {exc}")
            continue
        if schema[1] == "coil":
            values[section].setdefault("entries", []).append(value)
        elif key in values[section]:
            errors.append(f"line {number}: {key} set twice")
        else:
            values[section][key] = value

    missing = [s for s in REQUIRED_SECTIONS if s not in values]
    if missing:
        errors.append("missing sections: " + ", ".join(f"[{s}]" for s in missing))
    if errors:
        raise ConfigError(errors, path)

    sections = {}
    for name, cls in SECTION_TYPES.items():
        entries = dict(values.get(name, {}))
        if "entries" in entries:
            entries["entries"] = tuple(entries["entries"])
        sections[name] = cls(**entries)
    cfg = ScenarioConfig(**sections, path=path,
                         digest=hashlib.sha256(text.encode("utf-8")).hexdigest())
    _validate(cfg, lines, errors)
    if errors:
        raise ConfigError(errors, path)
    return cfg


def _validate(cfg: ScenarioConfig, lines: Dict[str, int], errors: List[str]) -> None:
    def fail(section, message):
        where = f"line {lines[section]}: " if section in lines else ""
        errors.append(f"{where}[{section}] {message}")

    f = cfg.field
    if f.source not in ("waveform", "coils"):
        fail("field", f"source must be 'waveform' or 'coils', got {f.source!r}")
    if f.source == "coils" and not cfg.coils.entries:
        fail("coils", "field source 'coils' needs at least one coil entry")
    if f.source == "waveform":
        try:
            cfg.waveform()
        except ValueError as exc:
            fail("field", str(exc))
        if f.B2 == 0:
            fail("field", "B2 must be set")
    try:
        cfg.atom_preset()
    except ValueError as exc:
        fail("atom", str(exc))
    a = cfg.analysis
    if a.sweep_parameter not in ("l", "n"):
        fail("analysis", "sweep_parameter must be 'l' or 'n'")
    if a.sampler not in ("flat_grid", "flat_random", "gaussian"):
        fail("analysis", f"unknown sampler {a.sampler!r}")
    if a.samples < 1:
        fail("analysis", "samples must be positive")
    if any(d <= 0 for d in a.deltas):
        fail("analysis", "deltas must be positive")
    d = cfg.dynamics
    if d.N < 8:
        fail("dynamics", "N must be at least 8")
    if d.gauge != "from_cos_beta0":
        try:
            float(d.gauge)
        except ValueError:
            fail("dynamics", f"gauge must be a number or 'from_cos_beta0', got {d.gauge!r}")
    unknown = set(cfg.output.formats) - {"csv", "gnuplot"}
    if unknown:
        fail("output", f"unknown formats {sorted(unknown)}")


def parse_config(path: str) -> ScenarioConfig:
    """Read and validate a scenario file."""
    if not os.path.isfile(path):
        raise ConfigError([f"config file not found: {path}"], path)
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    cfg = parse_config_text(text, path)
    logger.debug("parsed %s (sha256 %s)", path, cfg.digest)
    return cfg


def _format_number(value) -> str:
    return repr(float(value)) if not isinstance(value, int) else str(value)


def format_config(cfg: ScenarioConfig) -> str:
    """Serialize a scenario so that parse_config_text(format_config(cfg)) == cfg."""
    out: List[str] = []
    for name in SECTIONS:
        section = getattr(cfg, name)
        out.append(f"[{name}]")
        for f in fields(section):
            value = getattr(section, f.name)
            if value is None:
                continue
            if f.name == "entries":
                for kind, radius, position, current in value:
                    out.append(f"{kind} = {_format_number(radius)} cm, "
                               f"{_format_number(position)} cm, {_format_number(current)} A")
                continue
            dimension, kind = SCHEMA[name][f.name]
            if kind in ("str",):
                text = value
            elif kind == "strlist":
                text = ", ".join(value)
            elif kind == "list":
                text = ", ".join(_format_number(v) for v in value)
            elif kind == "int":
                text = str(int(value))
            else:
                text = _format_number(value)
                if dimension is not None:
                    text += " " + CANONICAL_UNIT[dimension]
            out.append(f"{f.name} = {text}")
        out.append("")
    return "\n".join(out)
