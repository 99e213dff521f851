"""
Core constants, atom presets and error types shared by every ringberry module.

All quantities use Gaussian-CGS units: lengths in cm, fields in Gauss,
time in seconds, energies in erg and masses in grams.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import constants as _si

# SI -> CGS conversions of the constants the trap model needs
HBAR = _si.hbar * 1e7                                            # erg s
MU_B = _si.physical_constants["Bohr magneton"][0] * 1e3          # erg / G
AMU = _si.atomic_mass * 1e3                                      # g

# Azimuthal field of an infinite straight wire: B_phi = WIRE_COEFF * I / rho
# (Gauss, Ampere, cm).
WIRE_COEFF = 0.2


@dataclass(frozen=True)
class Atom:
    """
    Magnetically trappable atom in a single Zeeman sublevel.

    Attributes:
        name: Label used in tables and manifests.
        mass: Atomic mass in g.
        g_F: Hyperfine Lande factor.
        m_F: Magnetic quantum number of the trapped state.
    """

    name: str
    mass: float
    g_F: float
    m_F: int

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError(f"atom mass must be positive, got {self.mass}")
        if self.m_F * self.g_F <= 0:
            raise ValueError(
                f"m_F*g_F = {self.m_F * self.g_F} does not describe a low-field seeker"
            )

    @property
    def zeeman_coefficient(self) -> float:
        """Energy per Gauss of the trapped state, m_F g_F mu_B (erg/G)."""
        return self.m_F * self.g_F * MU_B

    def potential(self, field_magnitude):
        """Zeeman energy (erg) at the given field magnitude (G)."""
        return self.zeeman_coefficient * field_magnitude

    def larmor_frequency(self, field_magnitude):
        """Spin precession frequency (Hz) at the given field magnitude (G)."""
        return abs(self.g_F) * MU_B * field_magnitude / (2.0 * np.pi * HBAR)

    def with_mass(self, mass: float) -> "Atom":
        return Atom(self.name, mass, self.g_F, self.m_F)


# 87Rb in the F=1, m_F=-1 low-field-seeking state
RB87 = Atom(name="87Rb", mass=86.909180527 * AMU, g_F=-0.5, m_F=-1)

ATOMS = {"87Rb": RB87, "Rb87": RB87}


class RingBerryError(Exception):
    """Base class for every error raised by ringberry."""

    code = "ringberry-error"


class NumericalError(RingBerryError):
    """A computation could not produce a trustworthy result."""

    code = "numerical-failure"


class SingularPointError(NumericalError):
    code = "singular-point"


class NoZeroError(NumericalError):
    code = "no-zero-exists"


class LocusVanishedError(NumericalError):
    code = "locus-vanished"


class CoilSingularityError(NumericalError):
    code = "coil-singularity"


class FitFailedError(NumericalError):
    code = "fit-failed"


class UndefinedAngleError(NumericalError):
    code = "undefined-angle"


class QuadratureError(NumericalError):
    code = "quadrature-failure"


class TrapNotFormedError(NumericalError):
    code = "trap-not-formed"


class NotAMinimumError(NumericalError):
    code = "not-a-minimum"


class MajoranaRiskError(NumericalError):
    code = "majorana-risk"


class ConnectionSingularError(NumericalError):
    code = "connection-singular"


class GridMismatchError(NumericalError):
    code = "grid-mismatch"


class StepTooLargeError(NumericalError):
    code = "step-too-large"


class UnwrapNeededError(NumericalError):
    code = "unwrap-needed"


class SemiclassicalInvalidError(NumericalError):
    code = "semiclassical-invalid"


class NoOverlapError(NumericalError):
    code = "no-overlap"


class UnfittableError(NumericalError):
    code = "unfittable"


class InconsistentRunsError(NumericalError):
    code = "inconsistent-runs"


class ConfigError(RingBerryError):
    """Scenario configuration is missing or invalid.

    ``messages`` holds every problem found, each prefixed with its line
    number when one applies.
    """

    code = "config-error"

    def __init__(self, messages: List[str], path: Optional[str] = None):
        self.messages = list(messages)
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(where + "; ".join(self.messages))


def error_code(exc: BaseException) -> str:
    """Stable code for an exception, used in CSV error columns."""
    return getattr(exc, "code", type(exc).__name__)
