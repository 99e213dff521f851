"""
Spin-1 adiabatic states aligned with the trap field and finite-difference
checks of the Berry-connection identities.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import MU_B, UndefinedAngleError
from .field_model import FieldVector, eval_analytic_field

_SQ2 = np.sqrt(2.0)


@dataclass(frozen=True)
class SpinOperators:
    """F = 1 angular momentum matrices in the F_z basis ordered (+1, 0, -1)."""

    Fx: np.ndarray
    Fy: np.ndarray
    Fz: np.ndarray
    mu_B: float = MU_B
    g_F: float = -0.5

    @classmethod
    def spin_one(cls, g_F: float = -0.5) -> "SpinOperators":
        fx = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _SQ2
        fy = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _SQ2
        fz = np.diag([1.0, 0.0, -1.0]).astype(complex)
        return cls(fx, fy, fz, MU_B, g_F)

    def along(self, n: np.ndarray) -> np.ndarray:
        """F . n for a 3-vector n."""
        return n[0] * self.Fx + n[1] * self.Fy + n[2] * self.Fz

    def zeeman_hamiltonian(self, b: np.ndarray) -> np.ndarray:
        """mu_B g_F F.B (erg) for a Cartesian field vector b (G)."""
        return self.mu_B * self.g_F * self.along(np.asarray(b, dtype=float))


SPIN1 = SpinOperators.spin_one()
M_MINUS = np.array([0.0, 0.0, 1.0], dtype=complex)


def rotation(axis: np.ndarray, angle: float, ops: SpinOperators = SPIN1) -> np.ndarray:
    """exp(-i angle F.n) for a unit axis n, exact for spin 1."""
    s = ops.along(np.asarray(axis, dtype=float))
    return np.eye(3) - 1j * np.sin(angle) * s + (np.cos(angle) - 1.0) * (s @ s)


@dataclass(frozen=True)
class AdiabaticState:
    amplitudes: np.ndarray
    beta: float
    phi: float

    @property
    def field_direction(self) -> np.ndarray:
        """Unit vector the state is anti-aligned with (F.n eigenvalue -1)."""
        sb = np.sin(self.beta)
        return np.array([sb * np.cos(self.phi), sb * np.sin(self.phi), np.cos(self.beta)])

    def expectation(self, op: np.ndarray) -> complex:
        return complex(np.vdot(self.amplitudes, op @ self.amplitudes))

    def eigen_residual(self, ops: SpinOperators = SPIN1) -> float:
        """|| (F.n + 1) psi || for the field direction n."""
        fn = ops.along(self.field_direction)
        return float(np.linalg.norm(fn @ self.amplitudes + self.amplitudes))


def beta_angle(b: FieldVector) -> float:
    """Angle between the field and the z axis, in [0, pi]."""
    mag = float(np.asarray(b.magnitude))
    if mag == 0.0:
        raise UndefinedAngleError("field vanishes; tilt angle is undefined")
    return float(np.arccos(np.clip(float(b.B_z) / mag, -1.0, 1.0)))


def tilt_angle(b: FieldVector) -> float:
    """Signed tilt atan2(B_rho, B_z) of the field in the (rho, z) half plane."""
    if float(np.asarray(b.magnitude)) == 0.0:
        raise UndefinedAngleError("field vanishes; tilt angle is undefined")
    return float(np.arctan2(float(b.B_rho), float(b.B_z)))


def lfs_state(beta: float, phi: float, gauge: str = "azimuthal") -> AdiabaticState:
    """
    Low-field-seeking state for a field tilted by beta towards e_rho at azimuth phi.

    ``gauge="rotation"`` is exp(-i beta F.e_phi)|-1>_z. The default
    ``gauge="azimuthal"`` multiplies that by exp(i phi), giving
    exp(-i phi F_z) exp(-i beta F_y)|-1>_z, whose phi-connection is i cos(beta).
    """
    e_phi = np.array([-np.sin(phi), np.cos(phi), 0.0])
    amps = rotation(e_phi, beta) @ M_MINUS
    if gauge == "azimuthal":
        amps = np.exp(1j * phi) * amps
    elif gauge != "rotation":
        raise ValueError(f"unknown gauge {gauge!r}")
    return AdiabaticState(amps, float(beta), float(phi))


def zeeman_energy(state: AdiabaticState, field_magnitude: float,
                  ops: SpinOperators = SPIN1) -> float:
    """<psi| mu_B g_F F.B |psi> for a field of the given magnitude along the state axis."""
    b = field_magnitude * state.field_direction
    return float(np.real(state.expectation(ops.zeeman_hamiltonian(b))))


def berry_connection_check(beta: float, phi: float, dphi: float = 1e-5,
                           gauge: str = "azimuthal") -> complex:
    """Central finite difference of <psi| d/dphi |psi>; equals i cos(beta)."""
    if not 0.0 < dphi <= 1e-5:
        raise ValueError("dphi must lie in (0, 1e-5]")
    here = lfs_state(beta, phi, gauge).amplitudes
    ahead = lfs_state(beta, phi + dphi, gauge).amplitudes
    behind = lfs_state(beta, phi - dphi, gauge).amplitudes
    return complex(np.vdot(here, ahead - behind) / (2.0 * dphi))


def time_derivative_check(w, point: Tuple[float, float], t: float, dt: Optional[float] = None,
                          phi: float = 0.0) -> complex:
    """
    Central finite difference of <psi| d/dt |psi> for the state following the
    drive at a fixed (rho, z) point, expressed per radian of drive phase
    (divided by omega). The tilt is continued through sign changes of B_rho.
    """
    rho, z = point
    omega = w.omega
    if dt is None:
        dt = 1e-5 / omega
    if dt <= 0:
        raise ValueError("dt must be positive")

    def state_at(time):
        tilt = tilt_angle(eval_analytic_field(w, rho, z, time))
        return lfs_state(tilt, phi).amplitudes

    here = state_at(t)
    return complex(np.vdot(here, state_at(t + dt) - state_at(t - dt)) / (2.0 * dt * omega))
