"""
ringberry - Berry phase of magnetically trapped atoms in time-orbiting ring traps

Field model, adiabatic spin states, time-averaged trap characterization,
geometric-phase analysis and 1-D ring interferometry, with a batch CLI.
"""

__version__ = "1.0.0"
__author__ = "ringberry developers"

from .core import (
    ATOMS,
    HBAR,
    MU_B,
    RB87,
    Atom,
    ConfigError,
    NumericalError,
    RingBerryError,
)
from .field_model import (
    Coil,
    CoilSet,
    CustomDrive,
    FieldExpansion,
    FieldVector,
    FieldWaveform,
    TrapMode,
    eval_analytic_field,
    eval_coil_field,
    fit_field_expansion,
    tort_example,
    trace_zero_locus,
    zero_locus,
)
from .spin_adiabatic import (
    AdiabaticState,
    beta_angle,
    berry_connection_check,
    lfs_state,
    time_derivative_check,
)
from .trap_analysis import (
    TrapCharacterization,
    adiabaticity_report,
    find_trap_center,
    time_avg_field_magnitude,
    trap_frequencies,
)
from .geometric_phase import (
    ConnectionSpectrum,
    FluctuationReport,
    berry_phase_closed,
    cos_beta0,
    fluctuation,
    fourier_spectrum,
    residual_phase_bound,
    sagnac_phase,
    sweep,
)
from .ring_dynamics import (
    ClassicalTrajectory,
    GaugeProfile,
    InterferenceResult,
    RingPotential,
    RingUnits,
    WavePacket,
    WeiNormanParams,
    classical_trajectory,
    extract_fringe_shift,
    init_packet,
    run_interference,
    semiclassical_propagate,
    split_step_evolve,
    wei_norman_propagate,
)
from .config import ScenarioConfig, format_config, parse_config

__all__ = [
    "ATOMS", "HBAR", "MU_B", "RB87", "Atom",
    "RingBerryError", "NumericalError", "ConfigError",
    "Coil", "CoilSet", "CustomDrive", "FieldExpansion", "FieldVector", "FieldWaveform",
    "TrapMode", "eval_analytic_field", "eval_coil_field", "fit_field_expansion",
    "tort_example", "trace_zero_locus", "zero_locus",
    "AdiabaticState", "beta_angle", "berry_connection_check", "lfs_state",
    "time_derivative_check",
    "TrapCharacterization", "adiabaticity_report", "find_trap_center",
    "time_avg_field_magnitude", "trap_frequencies",
    "ConnectionSpectrum", "FluctuationReport", "berry_phase_closed", "cos_beta0",
    "fluctuation", "fourier_spectrum", "residual_phase_bound", "sagnac_phase", "sweep",
    "ClassicalTrajectory", "GaugeProfile", "InterferenceResult", "RingPotential", "RingUnits",
    "WavePacket", "WeiNormanParams", "classical_trajectory", "extract_fringe_shift",
    "init_packet", "run_interference", "semiclassical_propagate", "split_step_evolve",
    "wei_norman_propagate",
    "ScenarioConfig", "format_config", "parse_config",
]
