"""
Spin-1 adiabatic state tests.
"""

import pytest
import numpy as np
from pathlib import Path
from hypothesis import given, settings, strategies as st

# Add the python directory to the path
import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from ringberry.core import RB87, UndefinedAngleError
from ringberry.field_model import FieldVector, tort_example
from ringberry.spin_adiabatic import (
    SPIN1, beta_angle, berry_connection_check, lfs_state, rotation, tilt_angle,
    time_derivative_check, zeeman_energy
)

angles = st.floats(0.05, np.pi - 0.05)
azimuths = st.floats(-np.pi, np.pi)


class TestSpinOperators:
    """Spin-1 matrices and rotations."""

    def test_commutator(self):
        comm = SPIN1.Fx @ SPIN1.Fy - SPIN1.Fy @ SPIN1.Fx
        np.testing.assert_allclose(comm, 1j * SPIN1.Fz, atol=1e-14)

    def test_rotation_is_unitary(self):
        u = rotation(np.array([0.0, 1.0, 0.0]), 0.7)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(3), atol=1e-14)

    def test_full_turn_is_identity(self):
        u = rotation(np.array([1.0, 0.0, 0.0]), 2 * np.pi)
        np.testing.assert_allclose(u, np.eye(3), atol=1e-12)


class TestAdiabaticState:
    """The low-field-seeking eigenstate of F.n."""

    @settings(max_examples=50, deadline=None)
    @given(beta=angles, phi=azimuths)
    def test_eigenstate_of_field_direction(self, beta, phi):
        state = lfs_state(beta, phi)
        assert state.eigen_residual() < 1e-12
        assert np.linalg.norm(state.amplitudes) == pytest.approx(1.0, abs=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(beta=angles, phi=azimuths)
    def test_fz_expectation(self, beta, phi):
        state = lfs_state(beta, phi)
        assert state.expectation(SPIN1.Fz).real == pytest.approx(-np.cos(beta), abs=1e-12)

    def test_gauges_differ_by_phase(self):
        a = lfs_state(0.8, 1.1, "azimuthal").amplitudes
        b = lfs_state(0.8, 1.1, "rotation").amplitudes
        np.testing.assert_allclose(a, np.exp(1.1j) * b, atol=1e-14)

    def test_unknown_gauge(self):
        with pytest.raises(ValueError):
            lfs_state(0.5, 0.0, "coulomb")

    def test_zeeman_energy_matches_atom_potential(self):
        state = lfs_state(0.4, 0.3)
        assert zeeman_energy(state, 2.0) == pytest.approx(RB87.potential(2.0), rel=1e-12)


class TestAngles:
    """Tilt angles of a field vector."""

    def test_beta_of_antiparallel_field(self):
        assert beta_angle(FieldVector(0.0, 0.0, -3.0)) == pytest.approx(np.pi)

    def test_beta_of_tilted_field(self):
        assert beta_angle(FieldVector(1.0, 0.0, 1.0)) == pytest.approx(np.pi / 4)

    def test_signed_tilt(self):
        assert tilt_angle(FieldVector(-1.0, 0.0, 1.0)) == pytest.approx(-np.pi / 4)

    def test_zero_field(self):
        with pytest.raises(UndefinedAngleError):
            beta_angle(FieldVector(0.0, 0.0, 0.0))
        with pytest.raises(UndefinedAngleError):
            tilt_angle(FieldVector(0.0, 0.0, 0.0))


class TestConnection:
    """Finite-difference checks of the Berry connection."""

    @settings(max_examples=30, deadline=None)
    @given(beta=angles, phi=azimuths)
    def test_azimuthal_connection_is_i_cos_beta(self, beta, phi):
        value = berry_connection_check(beta, phi)
        assert value.real == pytest.approx(0.0, abs=1e-8)
        assert value.imag == pytest.approx(np.cos(beta), abs=1e-8)

    def test_rotation_gauge_connection(self):
        value = berry_connection_check(0.6, 0.2, gauge="rotation")
        assert value.imag == pytest.approx(np.cos(0.6) - 1.0, abs=1e-8)

    @pytest.mark.parametrize("dphi", [0.0, 1e-3])
    def test_step_range(self, dphi):
        with pytest.raises(ValueError):
            berry_connection_check(0.5, 0.0, dphi=dphi)

    @pytest.mark.parametrize("fraction", [0.1, 0.35, 0.8])
    def test_time_connection_vanishes(self, fraction):
        w = tort_example()
        value = time_derivative_check(w, (0.12, 0.0), fraction * w.period)
        assert abs(value) < 1e-6

    def test_time_step_must_be_positive(self):
        w = tort_example()
        with pytest.raises(ValueError):
            time_derivative_check(w, (0.12, 0.0), 0.0, dt=-1.0)
