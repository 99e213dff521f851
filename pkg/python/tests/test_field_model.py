"""
Field model tests: analytic trap field, zero locus, coil fields and the
second-order expansion fit.
"""

import pytest
import numpy as np
from pathlib import Path
from hypothesis import given, settings, strategies as st

# Add the python directory to the path
import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from ringberry.core import (
    CoilSingularityError, FitFailedError, LocusVanishedError, NoZeroError, SingularPointError
)
from ringberry.field_model import (
    Coil, CoilSet, FieldVector, FieldWaveform, TrapMode, coil_field_fn, eval_analytic_field,
    eval_coil_field, field_divergence, fit_field_expansion, gradient_scale, tort_example,
    on_axis_loop_field, sample_waveform, trace_zero_locus, zero_locus
)


@pytest.fixture
def waveform():
    return tort_example()


@pytest.fixture
def static_bias():
    return FieldWaveform(B2=7800.0, L=0.1, l=0.05, bias_wire_current=5.0,
                         mode=TrapMode.STATIC_AZIMUTHAL_BIAS)


class TestFieldWaveform:
    """Drive coefficients and validation."""

    def test_coefficients_at_zero(self, waveform):
        b0, b1, b2 = waveform.coefficients(0.0)
        assert b0 == pytest.approx(7800.0 * 0.01)
        assert b1 == pytest.approx(7800.0 * 0.1)
        assert b2 == pytest.approx(7800.0)

    def test_sin_convention_is_quarter_period_shift(self):
        cos_drive = tort_example("cos")
        sin_drive = tort_example("sin")
        t = 0.3 * cos_drive.period
        _, b1_cos, _ = cos_drive.coefficients(t)
        _, b1_sin, _ = sin_drive.coefficients(t)
        assert b1_cos == pytest.approx(780.0 * np.cos(cos_drive.omega * t))
        assert b1_sin == pytest.approx(780.0 * np.sin(sin_drive.omega * t))

    def test_static_when_drive_amplitudes_vanish(self):
        assert FieldWaveform(B2=100.0, L=0.1).is_static
        assert not tort_example().is_static

    def test_static_mode_freezes_coefficients(self, static_bias):
        b0, b1, _ = static_bias.coefficients(np.linspace(0.0, 1e-3, 5))
        assert np.all(b0 == b0[0])
        assert np.all(b1 == pytest.approx(7800.0 * 0.05))

    @pytest.mark.parametrize("kwargs", [
        {"L": 0.0}, {"L": 0.1, "n": -0.1}, {"L": 0.1, "omega": 0.0}, {"L": 0.1, "b1_phase": "tan"},
    ])
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(ValueError):
            FieldWaveform(B2=7800.0, **kwargs)

    def test_scaled_keeps_other_parameters(self, waveform):
        scaled = waveform.scaled(l=0.05)
        assert scaled.l == 0.05
        assert scaled.n == waveform.n
        assert scaled.omega == waveform.omega


class TestAnalyticField:
    """The second-order field expansion."""

    def test_axis_field(self, waveform):
        b = eval_analytic_field(waveform, 0.0, 0.02, 0.0)
        b0, b1, b2 = (float(c) for c in waveform.coefficients(0.0))
        assert float(b.B_rho) == 0.0
        assert float(b.B_z) == pytest.approx(b0 + b1 * 0.02 + 0.5 * b2 * 0.02 ** 2)

    def test_broadcasts_times_against_points(self, waveform):
        t = np.linspace(0.0, waveform.period, 7)[:, None]
        rho = np.array([[0.05, 0.1, 0.15]])
        b = eval_analytic_field(waveform, rho, np.zeros_like(rho), t)
        assert b.magnitude.shape == (7, 3)

    @settings(max_examples=25, deadline=None)
    @given(rho=st.floats(0.01, 0.3), z=st.floats(-0.2, 0.2), phase=st.floats(0.0, 2 * np.pi))
    def test_divergence_free(self, rho, z, phase):
        w = tort_example()
        fn = sample_waveform(w, phase / w.omega)
        div = field_divergence(fn, rho, z, h=1e-4)
        assert abs(float(div)) <= 1e-6 * float(gradient_scale(fn, rho, z, h=1e-4))

    def test_negative_radius_rejected(self, waveform):
        with pytest.raises(ValueError):
            eval_analytic_field(waveform, -0.1, 0.0, 0.0)

    def test_bias_wire_field(self, static_bias):
        b = eval_analytic_field(static_bias, 0.2, 0.0, 0.0)
        assert float(b.B_phi) == pytest.approx(0.2 * 5.0 / 0.2)

    def test_bias_wire_singular_on_axis(self, static_bias):
        with pytest.raises(SingularPointError):
            eval_analytic_field(static_bias, 0.0, 0.0, 0.0)

    def test_field_vector_sum(self):
        total = FieldVector(1.0, 2.0, 2.0) + FieldVector(0.0, 0.0, 2.0)
        assert float(total.magnitude) == pytest.approx(np.sqrt(1.0 + 4.0 + 16.0))


class TestZeroLocus:
    """Location and topology of the instantaneous field zero."""

    def test_zero_locus_at_t0(self, waveform):
        rho0, z0 = zero_locus(waveform, 0.0)
        assert rho0 == pytest.approx(np.sqrt(4 * 0.01 - 2 * 0.01))
        assert z0 == pytest.approx(-0.1)

    @pytest.mark.parametrize("fraction", [0.0, 0.1, 0.4, 0.6])
    def test_field_vanishes_on_locus(self, waveform, fraction):
        t = fraction * waveform.period
        rho0, z0 = zero_locus(waveform, t)
        b = eval_analytic_field(waveform, rho0, z0, t)
        assert float(b.magnitude) <= 1e-9 * 7800.0 * 0.01

    def test_no_zero_for_negative_b0(self):
        w = FieldWaveform(B2=7800.0, L=0.1, n=0.2, l=0.0)
        with pytest.raises(NoZeroError):
            zero_locus(w, 0.25 * w.period * 3)

    def test_locus_vanishes_for_large_b1(self):
        w = FieldWaveform(B2=7800.0, L=0.1, l=0.2)
        with pytest.raises(LocusVanishedError):
            zero_locus(w, 0.0)

    def test_trace_encircles_center(self, waveform):
        trace = trace_zero_locus(waveform, samples=128, center=(0.12, -0.02))
        assert trace.times.shape == (128,)
        assert not trace.stationary
        assert trace.points().shape[1] == 2

    def test_trace_needs_tort_mode(self, static_bias):
        with pytest.raises(ValueError):
            trace_zero_locus(static_bias, center=(0.1, 0.0))

    def test_static_trace_is_stationary(self):
        w = FieldWaveform(B2=7800.0, L=0.1, l=0.05)
        trace = trace_zero_locus(w, samples=16, center=None)
        assert trace.stationary
        assert trace.winding == 0
        assert not trace.closed_flag


class TestCoils:
    """Biot-Savart fields of circular loops."""

    def test_on_axis_matches_closed_form(self):
        coil = Coil(0.3, 0.1, 289.0)
        z = np.linspace(-0.2, 0.2, 9)
        b = eval_coil_field(CoilSet((coil,)), np.zeros_like(z), z)
        np.testing.assert_allclose(b.B_z, on_axis_loop_field(coil, z), rtol=1e-12)
        np.testing.assert_allclose(b.B_rho, 0.0, atol=1e-12)

    def test_paraxial_limit_is_continuous(self):
        coils = CoilSet((Coil(0.3, 0.1, 289.0),))
        near = eval_coil_field(coils, 1e-4, 0.05)
        expected = 0.3 * np.pi * 289.0 * 0.09 * (0.05 - 0.1) * 1e-4 / (0.09 + 0.0025) ** 2.5
        assert float(near.B_rho) == pytest.approx(expected, rel=1e-5)

    def test_coil_field_divergence_free(self):
        fn = coil_field_fn(CoilSet.tort_example())
        for rho, z in [(0.05, 0.02), (0.1, -0.05), (0.02, 0.0)]:
            div = field_divergence(fn, rho, z, h=1e-3)
            assert abs(float(div)) <= 1e-6 * float(gradient_scale(fn, rho, z, h=1e-3))

    def test_anti_helmholtz_pair_cancels_at_center(self):
        pair = CoilSet.anti_helmholtz_pair(0.5, 0.2, 100.0)
        assert float(eval_coil_field(pair, 0.0, 0.0).B_z) == pytest.approx(0.0, abs=1e-12)

    def test_on_wire_raises(self):
        with pytest.raises(CoilSingularityError):
            eval_coil_field(CoilSet((Coil(0.3, 0.0, 1.0),)), 0.3, 0.0)

    @pytest.mark.parametrize("kwargs", [{"radius": 0.0}, {"radius": 0.1, "orientation": 2}])
    def test_invalid_coil(self, kwargs):
        args = {"axial_position": 0.0, "current": 1.0, **kwargs}
        with pytest.raises(ValueError):
            Coil(**args)


class TestExpansionFit:
    """Least-squares recovery of B0, B1, B2."""

    def test_recovers_analytic_coefficients(self, waveform):
        fit = fit_field_expansion(sample_waveform(waveform, 0.0), radius=0.01)
        assert fit.B0 == pytest.approx(78.0, rel=1e-8)
        assert fit.B1 == pytest.approx(780.0, rel=1e-8)
        assert fit.B2 == pytest.approx(7800.0, rel=1e-8)
        assert fit.relative_residual < 1e-10

    def test_coil_fit_matches_on_axis_derivatives(self):
        coils = CoilSet.tort_example()
        fit = fit_field_expansion(coil_field_fn(coils), radius=0.01)

        def on_axis(z):
            return sum(on_axis_loop_field(c, z) for c in coils.coils)

        h = 1e-3
        b0 = on_axis(0.0)
        b1 = (on_axis(h) - on_axis(-h)) / (2 * h)
        b2 = (on_axis(h) - 2 * b0 + on_axis(-h)) / h ** 2
        assert fit.B0 == pytest.approx(b0, rel=1e-3)
        assert fit.B1 == pytest.approx(b1, rel=1e-3)
        assert fit.B2 == pytest.approx(b2, rel=1e-2)
        assert fit.relative_residual < 1e-3

    def test_degenerate_stencil(self, waveform):
        with pytest.raises(FitFailedError):
            fit_field_expansion(sample_waveform(waveform, 0.0), radius=0.0)
