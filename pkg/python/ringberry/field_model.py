"""
Trap magnetic field: the second-order expansion about the ring-trap origin,
its time-periodic drive, and the circular-coil realization of the same field.
"""

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import ellipe, ellipk

from .core import (
    WIRE_COEFF,
    CoilSingularityError,
    FitFailedError,
    LocusVanishedError,
    NoZeroError,
    SingularPointError,
    error_code,
)

logger = logging.getLogger(__name__)


class TrapMode(str, enum.Enum):
    TORT = "tort"
    STATIC_AZIMUTHAL_BIAS = "static_azimuthal_bias"


# Offset added to the B1 drive phase. "cos" is B1 = B2 l cos(wt); "sin" is the
# B1 = B2 l sin(wt) form quoted for the coil-realized example.
B1_PHASE_OFFSETS = {"cos": 0.0, "sin": -0.5 * np.pi}


@dataclass(frozen=True)
class FieldVector:
    """Field components (G) in the cylindrical basis; scalars or broadcast arrays."""

    B_rho: np.ndarray
    B_phi: np.ndarray
    B_z: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.B_rho ** 2 + self.B_phi ** 2 + self.B_z ** 2)

    def __add__(self, other: "FieldVector") -> "FieldVector":
        return FieldVector(self.B_rho + other.B_rho,
                           self.B_phi + other.B_phi,
                           self.B_z + other.B_z)


@dataclass(frozen=True)
class FieldWaveform:
    """
    Time-periodic trap drive

        B0(t) = B2 [L^2 + n^2 sin(wt)],   B1(t) = B2 l cos(wt + offset),

    with constant curvature B2. In STATIC_AZIMUTHAL_BIAS mode the drive is
    frozen at B0 = B2 L^2, B1 = B2 l and an axial wire adds B_phi.

    Attributes:
        B2: Field curvature (G/cm^2).
        L, n, l: Length scales of the drive (cm).
        omega: Drive angular frequency (rad/s).
        bias_wire_current: Current in the axial wire (A); 0 disables B_phi.
        mode: TORT or STATIC_AZIMUTHAL_BIAS.
        b1_phase: "cos" or "sin" convention for the B1 drive.
    """

    B2: float
    L: float
    n: float = 0.0
    l: float = 0.0
    omega: float = 2.0 * np.pi * 5.0e3
    bias_wire_current: float = 0.0
    mode: TrapMode = TrapMode.TORT
    b1_phase: str = "cos"

    def __post_init__(self):
        object.__setattr__(self, "mode", TrapMode(self.mode))
        if self.L <= 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if self.n < 0 or self.l < 0:
            raise ValueError(f"n and l must be non-negative, got n={self.n}, l={self.l}")
        if self.mode is TrapMode.TORT and self.omega <= 0:
            raise ValueError(f"omega must be positive in TORT mode, got {self.omega}")
        if self.b1_phase not in B1_PHASE_OFFSETS:
            raise ValueError(f"b1_phase must be one of {sorted(B1_PHASE_OFFSETS)}")

    @property
    def is_static(self) -> bool:
        return self.mode is TrapMode.STATIC_AZIMUTHAL_BIAS or (self.n == 0 and self.l == 0)

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    def coefficients(self, t) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(B0, B1, B2) at time(s) t."""
        t = np.asarray(t, dtype=float)
        if self.mode is TrapMode.STATIC_AZIMUTHAL_BIAS:
            b0 = np.full_like(t, self.B2 * self.L ** 2)
            b1 = np.full_like(t, self.B2 * self.l)
        else:
            phase = self.omega * t
            b0 = self.B2 * (self.L ** 2 + self.n ** 2 * np.sin(phase))
            b1 = self.B2 * self.l * np.cos(phase + B1_PHASE_OFFSETS[self.b1_phase])
        return b0, b1, np.full_like(t, self.B2)

    def scaled(self, **changes) -> "FieldWaveform":
        return replace(self, **changes)


@dataclass(frozen=True)
class CustomDrive:
    """Drive with arbitrary periodic coefficient functions of time."""

    b0: Callable[[np.ndarray], np.ndarray]
    b1: Callable[[np.ndarray], np.ndarray]
    b2: Callable[[np.ndarray], np.ndarray]
    omega: float
    bias_wire_current: float = 0.0
    is_static: bool = False
    mode: TrapMode = TrapMode.TORT

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    def coefficients(self, t):
        t = np.asarray(t, dtype=float)
        ones = np.ones_like(t)
        return self.b0(t) * ones, self.b1(t) * ones, self.b2(t) * ones


def tort_example(b1_phase: str = "cos", omega: float = 2.0 * np.pi * 5.0e3) -> FieldWaveform:
    """Worked TORT example: B2 = 7800 G/cm^2 and L = l = n = 0.1 cm."""
    return FieldWaveform(B2=7800.0, L=0.1, n=0.1, l=0.1, omega=omega, b1_phase=b1_phase)


def eval_analytic_field(w, rho, z, t) -> FieldVector:
    """
    Second-order trap field at (rho, z) and time t.

    Inputs broadcast against each other, so a column of times against a row of
    points yields a (times, points) grid.
    """
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be non-negative")
    b0, b1, b2 = w.coefficients(t)
    b_rho = -0.5 * b1 * rho - 0.5 * b2 * rho * z
    b_z = b0 + b1 * z + 0.5 * b2 * (z ** 2 - 0.5 * rho ** 2)
    current = getattr(w, "bias_wire_current", 0.0)
    if current:
        if np.any(rho == 0):
            raise SingularPointError("azimuthal bias field is singular on the axis (rho = 0)")
        b_phi = WIRE_COEFF * current / rho + 0.0 * b_z
    else:
        b_phi = np.zeros(np.broadcast(b_rho, b_z).shape)
    b_rho, b_z = np.broadcast_arrays(b_rho, b_z)
    return FieldVector(b_rho, b_phi, b_z)


def zero_locus(w, t: float) -> Tuple[float, float]:
    """Point (rho0, z0) where the quadrupole part of the field vanishes at time t."""
    b0, b1, b2 = (float(c) for c in w.coefficients(t))
    if b0 * b2 <= 0:
        raise NoZeroError(f"B0*B2 = {b0 * b2:.6g} <= 0 at t = {t:.6g} s")
    radicand = 4.0 * b0 / b2 - 2.0 * b1 ** 2 / b2 ** 2
    if radicand < 0:
        raise LocusVanishedError(f"zero locus vanished at t = {t:.6g} s (radicand {radicand:.3g})")
    return float(np.sqrt(radicand)), -b1 / b2


@dataclass
class ZeroLocusTrace:
    """Zero-field point sampled over one drive period."""

    times: np.ndarray
    rho0: np.ndarray
    z0: np.ndarray
    present: np.ndarray
    center: Optional[Tuple[float, float]]
    winding: int
    closed_flag: bool
    stationary: bool
    errors: Tuple[str, ...] = ()        # error code per sample, "" where present

    def points(self) -> np.ndarray:
        return np.column_stack([self.rho0[self.present], self.z0[self.present]])


def _winding_number(rho: np.ndarray, z: np.ndarray, center: Tuple[float, float]) -> int:
    angles = np.arctan2(z - center[1], rho - center[0])
    closed = np.append(angles, angles[0])
    return int(np.rint(np.sum(np.diff(np.unwrap(closed))) / (2.0 * np.pi)))


def trace_zero_locus(w, samples: int = 256,
                     center: Optional[Tuple[float, float]] = None) -> ZeroLocusTrace:
    """
    Sample the zero locus over one period and decide whether it encircles the
    ring-trap center (closed torus) or collapses to an open arc.

    Samples where the zero does not exist are marked absent. When ``center`` is
    omitted it is located with trap_analysis.find_trap_center.
    """
    if getattr(w, "mode", TrapMode.TORT) is not TrapMode.TORT:
        raise ValueError("trace_zero_locus needs a TORT waveform")
    if samples < 3:
        raise ValueError("need at least 3 samples")
    times = np.arange(samples) * (w.period / samples)
    rho0 = np.full(samples, np.nan)
    z0 = np.full(samples, np.nan)
    errors = [""] * samples
    for i, t in enumerate(times):
        try:
            rho0[i], z0[i] = zero_locus(w, t)
        except (NoZeroError, LocusVanishedError) as exc:
            logger.debug("zero locus absent at sample %d: %s", i, exc)
            errors[i] = error_code(exc)
    present = ~np.isnan(rho0)

    pts = np.column_stack([rho0[present], z0[present]])
    stationary = bool(len(pts)) and bool(np.all(np.ptp(pts, axis=0) <= 1e-12 * w.L))

    if center is None and not w.is_static:
        from .trap_analysis import find_trap_center
        center = find_trap_center(w)

    winding = 0
    if center is not None and present.all() and not stationary:
        winding = _winding_number(rho0, z0, center)
    return ZeroLocusTrace(times, rho0, z0, present, center, winding,
                          closed_flag=abs(winding) >= 1, stationary=stationary,
                          errors=tuple(errors))


@dataclass(frozen=True)
class Coil:
    """Circular filamentary loop coaxial with z."""

    radius: float
    axial_position: float
    current: float
    orientation: int = 1

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"coil radius must be positive, got {self.radius}")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")

    @property
    def signed_current(self) -> float:
        return self.orientation * self.current


@dataclass(frozen=True)
class CoilSet:
    coils: Tuple[Coil, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "coils", tuple(self.coils))

    def __add__(self, other: "CoilSet") -> "CoilSet":
        return CoilSet(self.coils + other.coils)

    @classmethod
    def helmholtz_pair(cls, radius: float, half_separation: float, current: float) -> "CoilSet":
        """Two loops at z = +-half_separation carrying the same current."""
        return cls((Coil(radius, half_separation, current),
                    Coil(radius, -half_separation, current)))

    @classmethod
    def anti_helmholtz_pair(cls, radius: float, half_separation: float,
                            current: float) -> "CoilSet":
        """Two loops at z = +-half_separation carrying opposite currents."""
        return cls((Coil(radius, half_separation, current),
                    Coil(radius, -half_separation, current, orientation=-1)))

    @classmethod
    def tort_example(cls) -> "CoilSet":
        """Two Helmholtz pairs (a, b) and one anti-Helmholtz pair (c)."""
        return (cls.helmholtz_pair(0.3, 0.1, 289.0)
                + cls.helmholtz_pair(0.5, 0.25, -550.0)
                + cls.anti_helmholtz_pair(0.6, 0.5, 335.0))


def _loop_field(coil: Coil, rho: np.ndarray, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a = coil.radius
    current = coil.signed_current
    dz = z - coil.axial_position
    gap2 = (a - rho) ** 2 + dz ** 2
    if np.any(gap2 < (1e-12 * a) ** 2):
        raise CoilSingularityError(f"field requested on the wire of coil R={a} cm, A={coil.axial_position} cm")
    far2 = (a + rho) ** 2 + dz ** 2
    m = 4.0 * a * rho / far2
    K = ellipk(m)
    E = ellipe(m)
    pref = WIRE_COEFF * current / np.sqrt(far2)
    b_z = pref * (K + (a ** 2 - rho ** 2 - dz ** 2) / gap2 * E)

    near_axis = rho < 1e-6 * a
    with np.errstate(divide="ignore", invalid="ignore"):
        b_rho = pref * dz / rho * (-K + (a ** 2 + rho ** 2 + dz ** 2) / gap2 * E)
    # paraxial limit B_rho = -(rho/2) dBz/dz of the on-axis field
    series = 0.3 * np.pi * current * a ** 2 * dz * rho / (a ** 2 + dz ** 2) ** 2.5
    b_rho = np.where(near_axis, series, b_rho)
    return b_rho, b_z


def eval_coil_field(c: CoilSet, rho, z) -> FieldVector:
    """Superposed Biot-Savart field (G) of every loop in the set."""
    rho, z = np.broadcast_arrays(np.asarray(rho, dtype=float), np.asarray(z, dtype=float))
    if np.any(rho < 0):
        raise ValueError("rho must be non-negative")
    b_rho = np.zeros(rho.shape)
    b_z = np.zeros(rho.shape)
    for coil in c.coils:
        dr, dz = _loop_field(coil, rho, z)
        b_rho = b_rho + dr
        b_z = b_z + dz
    return FieldVector(b_rho, np.zeros(rho.shape), b_z)


def on_axis_loop_field(coil: Coil, z) -> np.ndarray:
    """Closed-form on-axis field of one loop (G)."""
    a = coil.radius
    dz = np.asarray(z, dtype=float) - coil.axial_position
    return 0.2 * np.pi * coil.signed_current * a ** 2 / (a ** 2 + dz ** 2) ** 1.5


@dataclass(frozen=True)
class FieldExpansion:
    B0: float
    B1: float
    B2: float
    residual_norm: float
    relative_residual: float
    condition_number: float

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.B0, self.B1, self.B2


def fit_field_expansion(field_fn: Callable[[np.ndarray, np.ndarray], FieldVector],
                        radius: float = 0.01, points: int = 9,
                        max_condition: float = 1e12) -> FieldExpansion:
    """
    Least-squares fit of the second-order form to a field sampled on a
    (rho, z) stencil of half-width ``radius`` around the origin.
    """
    if radius <= 0 or points < 2:
        raise FitFailedError(f"degenerate stencil (radius={radius}, points={points})")
    rho, z = np.meshgrid(np.linspace(0.0, radius, points),
                         np.linspace(-radius, radius, points), indexing="ij")
    rho = rho.ravel()
    z = z.ravel()
    sample = field_fn(rho, z)

    zeros = np.zeros_like(rho)
    rows_rho = np.column_stack([zeros, -0.5 * rho, -0.5 * rho * z])
    rows_z = np.column_stack([np.ones_like(rho), z, 0.5 * (z ** 2 - 0.5 * rho ** 2)])
    design = np.vstack([rows_rho, rows_z])
    target = np.concatenate([np.broadcast_to(sample.B_rho, rho.shape),
                             np.broadcast_to(sample.B_z, rho.shape)])

    # column scaling keeps the curvature column comparable to the constant one
    scale = np.array([1.0, 1.0 / radius, 1.0 / radius ** 2])
    scaled = design * scale
    cond = float(np.linalg.cond(scaled))
    if not np.isfinite(cond) or cond > max_condition:
        raise FitFailedError(f"ill-conditioned stencil (condition number {cond:.3g})")
    coeffs, *_ = np.linalg.lstsq(scaled, target, rcond=None)
    coeffs = coeffs * scale
    residual = float(np.linalg.norm(design @ coeffs - target))
    norm = float(np.linalg.norm(target)) or 1.0
    return FieldExpansion(float(coeffs[0]), float(coeffs[1]), float(coeffs[2]),
                          residual, residual / norm, cond)


def field_divergence(field_fn: Callable[[np.ndarray, np.ndarray], FieldVector],
                     rho, z, h: float = 1e-3) -> np.ndarray:
    """Divergence of an axisymmetric field by fourth-order central differences."""
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)

    def d(component, axis):
        offsets = (2 * h, h, -h, -2 * h)
        weights = (-1.0, 8.0, -8.0, 1.0)
        total = 0.0
        for off, wgt in zip(offsets, weights):
            sample = field_fn(rho + off, z) if axis == 0 else field_fn(rho, z + off)
            total = total + wgt * getattr(sample, component)
        return total / (12.0 * h)

    here = field_fn(rho, z)
    return here.B_rho / rho + d("B_rho", 0) + d("B_z", 1)


def gradient_scale(field_fn: Callable[[np.ndarray, np.ndarray], FieldVector],
                   rho, z, h: float = 1e-3) -> np.ndarray:
    """Size of the local field-gradient tensor, used to normalize divergences."""
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    up_r, dn_r = field_fn(rho + h, z), field_fn(rho - h, z)
    up_z, dn_z = field_fn(rho, z + h), field_fn(rho, z - h)
    parts = [(up_r.B_rho - dn_r.B_rho), (up_r.B_z - dn_r.B_z),
             (up_z.B_rho - dn_z.B_rho), (up_z.B_z - dn_z.B_z)]
    return np.sqrt(sum(p ** 2 for p in parts)) / (2.0 * h)


def sample_waveform(w, t: float) -> Callable[[np.ndarray, np.ndarray], FieldVector]:
    """Freeze a drive at time t as a (rho, z) field function."""
    return lambda rho, z: eval_analytic_field(w, rho, z, t)


def coil_field_fn(c: CoilSet) -> Callable[[np.ndarray, np.ndarray], FieldVector]:
    return lambda rho, z: eval_coil_field(c, rho, z)
