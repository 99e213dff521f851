#!/usr/bin/env python3
"""
ringberry command-line interface.

Runs one scenario subcommand against a configuration file and writes CSV
tables (and optionally gnuplot data blocks) plus a run manifest.
"""

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from .config import ScenarioConfig, parse_config
from .core import HBAR, ConfigError, RingBerryError, error_code
from .field_model import TrapMode, coil_field_fn, fit_field_expansion, trace_zero_locus
from .geometric_phase import (
    SweepSettings,
    berry_phase_closed,
    delta_column,
    fit_slope,
    fourier_spectrum,
    residual_phase_bound,
    sagnac_gauge,
    sagnac_phase,
    sweep,
    worked_example_report,
)
from .ring_dynamics import GaugeProfile, extract_fringe_shift, run_interference
from .trap_analysis import adiabaticity_report, ring_center, time_averaged_contours
from .utils import emit_plot_data, save_table, write_manifest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

COIL_TOLERANCE = 0.15


@dataclass
class RunContext:
    cfg: ScenarioConfig
    out_dir: str
    seed: int
    threads: int = 1
    written: List[str] = field(default_factory=list)

    def write(self, table: pd.DataFrame, name: str, series: Optional[str] = None) -> None:
        formats = self.cfg.output.formats
        if "csv" in formats:
            self.written.append(save_table(table, os.path.join(self.out_dir, f"{name}.csv")))
        if "gnuplot" in formats:
            numeric = [c for c in table.columns
                       if c != series and pd.api.types.is_numeric_dtype(table[c])]
            self.written.append(emit_plot_data(table, os.path.join(self.out_dir, f"{name}.dat"),
                                               "gnuplot-block", series, numeric))


def _trap(ctx: RunContext) -> None:
    cfg = ctx.cfg
    w = cfg.waveform()
    center = ring_center(w)
    report = adiabaticity_report(w, center, cfg.atom_preset())
    row = {"mode": w.mode.value, **report.as_row(),
           "field_average_G": report.field_average, "min_field_G": report.min_field}
    ctx.write(pd.DataFrame([row]), "trap")
    print(f"   ring center: rho_c = {center[0]:.6g} cm, z_c = {center[1]:.6g} cm")
    print(f"   trap frequencies: f_rho = {report.f_rho:.1f} Hz, f_z = {report.f_z:.1f} Hz")

    if w.mode is TrapMode.TORT and not w.is_static:
        trace = trace_zero_locus(w, center=center)
        ctx.write(pd.DataFrame({"t_s": trace.times, "rho0_cm": trace.rho0, "z0_cm": trace.z0,
                                "winding": trace.winding,
                                "error": list(trace.errors)}),
                  "zero_locus")

    L = w.L
    rho = np.linspace(max(center[0] - 2.0 * L, 1e-3 * L), center[0] + 2.0 * L, 41)
    z = np.linspace(center[1] - 2.0 * L, center[1] + 2.0 * L, 41)
    grid = time_averaged_contours(w, rho, z)
    rr, zz = np.meshgrid(rho / L, z / L, indexing="ij")
    ctx.write(pd.DataFrame({"rho_over_L": rr.ravel(), "z_over_L": zz.ravel(),
                            "B_avg_over_B0": grid.ravel()}), "contours", series="rho_over_L")


def _sweep(ctx: RunContext) -> None:
    a = ctx.cfg.analysis
    base = ctx.cfg.waveform()
    other = "n" if a.sweep_parameter == "l" else "l"
    x = f"{a.sweep_parameter}_over_L"
    settings = SweepSettings(parameter=a.sweep_parameter, observables=("center", "spectrum"),
                             n_max=a.n_max, seed=ctx.seed)
    tables = []
    for value in a.series:
        table = sweep(base.scaled(**{other: value * base.L}), a.grid, settings, ctx.threads)
        if not table.empty:
            small = table[x] <= np.median(a.grid)
            table["fitted_slope"] = fit_slope(table.loc[small, x], table.loc[small, "cos_beta0"])
            print(f"   {other}/L = {value:g}: fitted slope of cos beta0 = {table['fitted_slope'].iloc[0]:.4f}")
        tables.append(table)
    ctx.write(pd.concat(tables, ignore_index=True), "sweep", series=f"{other}_over_L")


def _fluct(ctx: RunContext) -> None:
    a = ctx.cfg.analysis
    base = ctx.cfg.waveform()
    x = f"{a.sweep_parameter}_over_L"
    settings = SweepSettings(parameter=a.sweep_parameter, observables=("center", "fluctuation"),
                             deltas=a.deltas, sampler=a.sampler, samples=a.samples,
                             seed=ctx.seed)
    wide = sweep(base, a.grid, settings, ctx.threads)
    rows = []
    for delta in a.deltas:
        for _, r in wide.iterrows():
            rows.append({"delta_over_L": delta, x: r[x], "rho_c_cm": r["rho_c_cm"],
                         "f": r[delta_column(delta)], "error": r["error"]})
    table = pd.DataFrame(rows, columns=["delta_over_L", x, "rho_c_cm", "f", "error"])
    ctx.write(table, "fluct", series="delta_over_L")


def _phase(ctx: RunContext) -> None:
    a = ctx.cfg.analysis
    w = ctx.cfg.waveform()
    center = ring_center(w)
    spectrum = fourier_spectrum(w, *center, a.n_max)
    gamma = berry_phase_closed(spectrum.cos_beta0, a.winding)
    row = {
        "rho_c_cm": center[0], "z_c_cm": center[1], "cos_beta0": spectrum.cos_beta0,
        "winding": a.winding, "gamma_C_rad": gamma, "gamma_over_pi": gamma / np.pi,
        "orbit_rate_rad_per_s": a.orbit_rate,
        "residual_bound_rad": residual_phase_bound(spectrum, a.orbit_rate),
        "parseval_residual": spectrum.parseval_residual,
    }
    ctx.write(pd.DataFrame([row]), "phase")
    ctx.write(pd.DataFrame(spectrum.harmonics, columns=["n", "C_n", "phase_n_rad"]), "spectrum")
    print(f"   cos beta0 = {spectrum.cos_beta0:.6g}, gamma_C = {gamma / np.pi:.4f} pi")


def _gauge_profile(cfg: ScenarioConfig) -> GaugeProfile:
    d = cfg.dynamics
    if d.gauge == "from_cos_beta0":
        w = cfg.waveform()
        return GaugeProfile.from_cos_beta0(w, ring_center(w))
    value = float(d.gauge)
    if d.gauge_cos:
        amplitude = d.gauge_cos
        return GaugeProfile(value, lambda phi: amplitude * np.cos(phi), "custom")
    return GaugeProfile.uniform(value)


def _interfere(ctx: RunContext) -> None:
    d = ctx.cfg.dynamics
    gauge = _gauge_profile(ctx.cfg)
    with_a = run_interference(gauge, v0=d.v0, width=d.width, N=d.N, dt=d.dt)
    reference = run_interference(GaugeProfile.uniform(d.reference_gauge), v0=d.v0,
                                 width=d.width, N=d.N, dt=with_a.dt)
    shift = extract_fringe_shift(with_a, reference)
    row = {
        "N": with_a.N, "dt": with_a.dt, "overlap_time": with_a.overlap_time,
        "overlap_angle_rad": with_a.overlap_angle, "fringe_wavenumber": with_a.fringe_wavenumber,
        "fringe_contrast": with_a.fringe_contrast, "fringe_phase_rad": with_a.fringe_phase,
        "xi_rad": with_a.xi, "extracted_gamma_rad": with_a.extracted_gamma,
        "loop_integral_rad": with_a.loop_integral, "fringe_shift_rad": shift,
    }
    ctx.write(pd.DataFrame([row]), "interference")
    ctx.write(pd.DataFrame(with_a.table()), "density")
    print(f"   extracted gamma = {with_a.extracted_gamma:.6f} rad "
          f"(loop integral {with_a.loop_integral:.6f} rad)")


def _coils(ctx: RunContext) -> None:
    cfg = ctx.cfg
    fit = fit_field_expansion(coil_field_fn(cfg.coil_set()), radius=cfg.coils.fit_radius)
    f = cfg.field
    targets = (f.B2 * f.L ** 2, f.B2 * f.l, f.B2)
    row = {"B0_G": fit.B0, "B1_G_per_cm": fit.B1, "B2_G_per_cm2": fit.B2,
           "residual_G": fit.residual_norm, "relative_residual": fit.relative_residual,
           "condition_number": fit.condition_number}
    within = True
    for name, value, target in zip(("B0", "B1", "B2"), fit.as_tuple(), targets):
        deviation = abs(value / target - 1.0) if target else float("nan")
        row[f"{name}_target"] = target
        row[f"{name}_deviation"] = deviation
        within = within and bool(deviation <= COIL_TOLERANCE)
    row["within_tolerance"] = within
    if not within:
        logger.warning("coil fit (%.4g G, %.4g G/cm, %.4g G/cm2) is outside %.0f%% of the targets",
                       fit.B0, fit.B1, fit.B2, 100 * COIL_TOLERANCE)
    ctx.write(pd.DataFrame([row]), "coils")
    print(f"   fitted B0 = {fit.B0:.4g} G, B1 = {fit.B1:.4g} G/cm, B2 = {fit.B2:.4g} G/cm2")


def _sagnac(ctx: RunContext) -> None:
    cfg = ctx.cfg
    a = cfg.analysis
    atom = cfg.atom_preset()
    rho_c = a.ring_radius if a.ring_radius is not None else ring_center(cfg.waveform())[0]
    phase = sagnac_phase(atom.mass, a.rotation_rate, rho_c, a.rotation_angle)
    area_form = 2.0 * atom.mass * a.rotation_rate * np.pi * rho_c ** 2 * np.cos(a.rotation_angle) / HBAR
    row = {"mass_g": atom.mass, "rotation_rate_rad_per_s": a.rotation_rate, "rho_c_cm": rho_c,
           "theta_rad": a.rotation_angle, "sagnac_phase_rad": phase, "area_form_rad": area_form,
           "equivalent_gauge": sagnac_gauge(atom.mass, a.rotation_rate, rho_c, a.rotation_angle)}
    ctx.write(pd.DataFrame([row]), "sagnac")
    print(f"   Sagnac phase = {phase:.6g} rad")


def _example(ctx: RunContext) -> None:
    table = worked_example_report(atom=ctx.cfg.atom_preset())
    ctx.write(table, "worked_example", series="b1_phase")


SUBCOMMANDS: Dict[str, Callable[[RunContext], None]] = {
    "trap": _trap,
    "sweep": _sweep,
    "phase": _phase,
    "fluct": _fluct,
    "interfere": _interfere,
    "coils": _coils,
    "sagnac": _sagnac,
    "example": _example,
}


def run_scenario(cfg: ScenarioConfig, subcommand: str, out_dir: Optional[str] = None,
                 seed: Optional[int] = None, threads: int = 1) -> List[str]:
    """Run one subcommand and return the files written, manifest last."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError([f"unknown subcommand {subcommand!r}"], cfg.path)
    ctx = RunContext(cfg, out_dir or cfg.output.directory,
                     cfg.analysis.seed if seed is None else seed, max(threads, 1))
    os.makedirs(ctx.out_dir, exist_ok=True)
    start = time.time()
    try:
        SUBCOMMANDS[subcommand](ctx)
    except RingBerryError as exc:
        write_manifest(ctx.out_dir, subcommand, cfg.path, cfg.digest, ctx.seed,
                       time.time() - start, ctx.written, status="failed", error=error_code(exc))
        raise
    manifest = write_manifest(ctx.out_dir, subcommand, cfg.path, cfg.digest, ctx.seed,
                              time.time() - start, ctx.written)
    return ctx.written + [manifest]


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="ringberry",
        description="Geometric phase of atoms in time-orbiting ring traps",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Trap center, frequencies and adiabaticity for the bundled example
  ringberry trap --config python/ringberry/data/example_tort.cfg --out results

  # cos(beta_0) against l/L for several n/L series
  ringberry sweep --config python/ringberry/data/example_tort.cfg --threads 4

  # Two-packet interference with the configured gauge potential
  ringberry interfere --config python/ringberry/data/example_tort.cfg --seed 7
        """,
    )
    parser.add_argument("subcommand", choices=sorted(SUBCOMMANDS), help="scenario to run")
    parser.add_argument("--config", required=True, help="scenario configuration file")
    parser.add_argument("--out", default=None, help="output directory (default: from config)")
    parser.add_argument("--seed", type=int, default=None, help="random seed (default: from config)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for sweeps (default: $RINGBERRY_THREADS or 1)")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    parser.add_argument("--quiet", "-q", action="store_true", help="errors only")
    return parser.parse_args(argv)


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.ERROR
    else:
        level = getattr(logging, os.environ.get("RINGBERRY_LOG_LEVEL", "WARNING").upper(),
                        logging.WARNING)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def resolve_threads(requested: Optional[int]) -> int:
    if requested is not None:
        return requested
    raw = os.environ.get("RINGBERRY_THREADS", "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        raise ConfigError([f"RINGBERRY_THREADS must be an integer, got {raw!r}"])


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    args = parse_arguments(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        cfg = parse_config(args.config)
        threads = resolve_threads(args.threads)
        print(f"Running '{args.subcommand}' from {args.config}")
        files = run_scenario(cfg, args.subcommand, args.out, args.seed, threads)
    except ConfigError as exc:
        print(f"Configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RingBerryError as exc:
        print(f"Numerical failure [{error_code(exc)}]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except KeyboardInterrupt:
        print("\nInterrupted by user", file=sys.stderr)
        return 1
    for path in files:
        print(f"   wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
