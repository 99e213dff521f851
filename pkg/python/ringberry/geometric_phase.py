"""
Geometric phase of the trapped spin: the averaged connection cos(beta_0),
its drive harmonics, closed- and open-loop phases, transverse dephasing
estimates, parameter sweeps and the rotation (Sagnac) analogue.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from .core import (
    HBAR,
    RB87,
    Atom,
    ConnectionSingularError,
    RingBerryError,
    error_code,
)
from .field_model import FieldWaveform, TrapMode, eval_analytic_field, tort_example
from .trap_analysis import (
    MAX_DOUBLINGS,
    MIN_NODES,
    find_trap_center,
    periodic_average,
    ring_center,
    trap_frequencies,
)

logger = logging.getLogger(__name__)

SAMPLERS = ("flat_grid", "flat_random", "gaussian")
SPECTRUM_SAMPLES = 2 ** 12
SPECTRUM_FLOOR = 1e-12
POINT_BATCH = 256


def _cos_beta_integrand(w, rho, z):
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))

    def integrand(t):
        b = eval_analytic_field(w, rho[None, :], z[None, :], t)
        mag = b.magnitude
        b0, b1, b2 = w.coefficients(t)
        scale = (np.abs(b0) + np.abs(b1) * (rho + np.abs(z))[None, :]
                 + np.abs(b2) * (rho ** 2 + z ** 2)[None, :])
        if np.any(mag <= 1e-12 * scale) or np.any(mag == 0):
            raise ConnectionSingularError("field passes through zero during the drive period")
        return b.B_z / mag
    return integrand


def cos_beta_samples(w, rho: float, z: float, samples: int = SPECTRUM_SAMPLES) -> np.ndarray:
    """cos beta(t) = B_z/|B| at ``samples`` uniform times over one period."""
    t = np.arange(samples) * (w.period / samples)
    return _cos_beta_integrand(w, rho, z)(t[:, None])[:, 0]


def _cos_beta0(w, rho, z, rtol=1e-10, nodes=None, strict=True):
    if w.is_static:
        values = _cos_beta_integrand(w, rho, z)(np.zeros((1, 1)))[0]
        return values, 1
    result = periodic_average(_cos_beta_integrand(w, rho, z), w.period,
                              rtol=rtol, atol=rtol, nodes=nodes, strict=strict)
    return result.value, result.nodes


def cos_beta0(w, rho, z, rtol: float = 1e-10, nodes: Optional[int] = None):
    """
    Time average of B_z/|B| over one drive period at (rho, z).

    Scalar inputs give a float, arrays give an array. Raises
    ConnectionSingularError when the field vanishes at a quadrature node.
    """
    scalar = np.ndim(rho) == 0 and np.ndim(z) == 0
    value, _ = _cos_beta0(w, rho, z, rtol, nodes)
    return float(value[0]) if scalar else value


@dataclass
class ConnectionSpectrum:
    """cos beta(t) = cos_beta0 + sum_n C_n cos(n omega t + phase_n)."""

    cos_beta0: float
    harmonics: List[Tuple[int, float, float]]
    omega: float
    parseval_residual: float = 0.0
    reconstruction_rms: float = 0.0

    def coefficient(self, n: int) -> float:
        for index, amplitude, _ in self.harmonics:
            if index == n:
                return amplitude
        return 0.0

    def reconstruct(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        total = np.full(t.shape, self.cos_beta0)
        for n, amplitude, phase in self.harmonics:
            total = total + amplitude * np.cos(n * self.omega * t + phase)
        return total


def spectrum_from_samples(values: np.ndarray, omega: float, n_max: int) -> ConnectionSpectrum:
    """Fourier decomposition of one period of uniformly sampled cos beta(t)."""
    values = np.asarray(values, dtype=float)
    count = len(values)
    if n_max >= count // 2:
        raise ValueError(f"n_max={n_max} needs more than {count} samples")
    coeffs = np.fft.rfft(values) / count
    harmonics = []
    for n in range(1, n_max + 1):
        amplitude = 2.0 * abs(coeffs[n])
        if amplitude <= SPECTRUM_FLOOR:
            harmonics.append((n, 0.0, 0.0))
        else:
            harmonics.append((n, float(amplitude), float(np.angle(coeffs[n]))))
    spectrum = ConnectionSpectrum(float(coeffs[0].real), harmonics, omega)
    kept = spectrum.cos_beta0 ** 2 + sum(c ** 2 for _, c, _ in harmonics) / 2.0
    spectrum.parseval_residual = float(np.mean(values ** 2) - kept)
    t = np.arange(count) * (2.0 * np.pi / omega / count)
    spectrum.reconstruction_rms = float(np.sqrt(np.mean((spectrum.reconstruct(t) - values) ** 2)))
    return spectrum


def fourier_spectrum(w, rho: float, z: float, n_max: int = 8,
                     samples: int = SPECTRUM_SAMPLES) -> ConnectionSpectrum:
    """
    Harmonics of cos beta(t) at a point by FFT. The sample count is raised to
    the node count the averaged connection needs to converge, so the mean
    term agrees with cos_beta0.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if w.is_static:
        value = cos_beta0(w, rho, z)
        return ConnectionSpectrum(value, [(n, 0.0, 0.0) for n in range(1, n_max + 1)],
                                  getattr(w, "omega", 0.0) or 1.0)
    _, nodes = _cos_beta0(w, rho, z)
    count = max(samples, nodes)
    return spectrum_from_samples(cos_beta_samples(w, rho, z, count), w.omega, n_max)


def berry_phase_closed(cos_beta0: float, q: int) -> float:
    """gamma_C = 2 pi q cos(beta_0) for q circuits of the ring."""
    if abs(cos_beta0) > 1.0:
        raise ValueError(f"|cos beta0| must not exceed 1, got {cos_beta0}")
    return 2.0 * np.pi * cos_beta0 * q


def residual_phase_bound(spectrum: ConnectionSpectrum, Omega: float) -> float:
    """Upper bound sum_n 2 C_n Omega / (n omega) on the oscillating phase contribution."""
    if Omega < 0:
        raise ValueError("Omega must be non-negative")
    return float(sum(2.0 * c * Omega / (n * spectrum.omega) for n, c, _ in spectrum.harmonics))


@dataclass
class OpenLoopPhase:
    averaged: float
    exact: float
    bound: float

    @property
    def deviation(self) -> float:
        return abs(self.exact - self.averaged)


def open_loop_phase(w, center: Tuple[float, float], times: Sequence[float],
                    phi: Sequence[float], n_max: int = 8) -> OpenLoopPhase:
    """
    Phase accumulated along a sampled azimuthal trajectory phi(t) through the
    ring center: the averaged form cos(beta_0)[phi(t) - phi(0)] next to the
    integral of cos beta(t) dphi, with the harmonic bound at the peak angular
    velocity.
    """
    times = np.asarray(times, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if times.shape != phi.shape or times.size < 2:
        raise ValueError("times and phi need the same length, at least 2")
    rho_c, z_c = center
    spectrum = fourier_spectrum(w, rho_c, z_c, n_max)
    cos_t = _cos_beta_integrand(w, rho_c, z_c)(times[:, None])[:, 0]
    omega_peak = float(np.max(np.abs(np.gradient(phi, times))))
    return OpenLoopPhase(averaged=spectrum.cos_beta0 * float(phi[-1] - phi[0]),
                         exact=float(trapezoid(cos_t, phi)),
                         bound=residual_phase_bound(spectrum, omega_peak))


@dataclass
class FluctuationReport:
    f: float
    delta: float
    samples: int
    contrast: float
    standard_error: float = 0.0
    sampler: str = "flat_grid"
    center_value: float = 0.0


def _sample_region(center, delta, sampler, samples, rng, widths=None):
    rho_c, z_c = center
    if sampler == "flat_grid":
        per_axis = int(np.ceil(np.sqrt(samples)))
        r, z = np.meshgrid(np.linspace(rho_c - delta, rho_c + delta, per_axis),
                           np.linspace(z_c - delta, z_c + delta, per_axis), indexing="ij")
        return r.ravel(), z.ravel()
    if sampler == "flat_random":
        return (rng.uniform(rho_c - delta, rho_c + delta, samples),
                rng.uniform(z_c - delta, z_c + delta, samples))
    sigma_rho, sigma_z = widths
    return rng.normal(rho_c, sigma_rho, samples), rng.normal(z_c, sigma_z, samples)


def ground_state_widths(w, center: Tuple[float, float], atom: Atom = RB87) -> Tuple[float, float]:
    """Harmonic ground-state position spreads sqrt(hbar / 2 m omega_i) (cm)."""
    freqs = trap_frequencies(w, center, atom)
    return tuple(float(np.sqrt(HBAR / (2.0 * atom.mass * 2.0 * np.pi * f)))
                 for f in (freqs.f_rho, freqs.f_z))


def fluctuation(w, center: Tuple[float, float], delta: float, sampler: str = "flat_grid",
                samples: int = 10000, seed: int = 0, nodes: Optional[int] = None,
                atom: Atom = RB87, widths: Optional[Tuple[float, float]] = None,
                workers: int = 1) -> FluctuationReport:
    """
    RMS spread f of cos(beta_0) over the transverse region around the trap
    center, and the single-circuit contrast |<exp(2 pi i [cos beta_0(r) - cos beta_0(r_c)])>|.

    The flat samplers cover the square of half-width ``delta``; the gaussian
    sampler draws from the harmonic ground state of the averaged trap.
    """
    if sampler not in SAMPLERS:
        raise ValueError(f"sampler must be one of {SAMPLERS}")
    if sampler != "gaussian" and delta <= 0:
        raise ValueError("delta must be positive")
    if samples < 1:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(seed)
    if sampler == "gaussian" and widths is None:
        widths = ground_state_widths(w, center, atom)

    reference, converged = _cos_beta0(w, *center)
    reference = float(reference[0])
    if nodes is None and not w.is_static:
        nodes = min(4 * converged, MIN_NODES * 2 ** MAX_DOUBLINGS)

    rho, z = _sample_region(center, delta, sampler, samples, rng, widths)
    if np.any(rho <= 0):
        raise ConnectionSingularError("sampling region reaches the trap axis")

    batches = [(rho[i:i + POINT_BATCH], z[i:i + POINT_BATCH]) for i in range(0, len(rho), POINT_BATCH)]

    def run(batch):
        return _cos_beta0(w, batch[0], batch[1], nodes=nodes)[0]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = np.concatenate(list(pool.map(run, batches)))
    else:
        values = np.concatenate([run(b) for b in batches])

    dev = values - reference
    sq = dev ** 2
    f = float(np.sqrt(np.mean(sq)))
    se_sq = float(np.std(sq) / np.sqrt(len(sq)))
    se = se_sq / (2.0 * f) if f > 0 else 0.0
    contrast = float(min(abs(np.mean(np.exp(2j * np.pi * dev))), 1.0))
    spread = delta if sampler != "gaussian" else float(max(widths))
    logger.debug("fluctuation %s delta=%.3g cm: f=%.6g +- %.2g over %d points",
                 sampler, spread, f, se, len(values))
    return FluctuationReport(f, spread, len(values), contrast, se, sampler, reference)


@dataclass(frozen=True)
class SweepSettings:
    """What each sweep row computes."""

    parameter: str = "l"                # "l" or "n", swept in units of L
    observables: Tuple[str, ...] = ("center", "spectrum")
    deltas: Tuple[float, ...] = ()      # fluctuation half-widths in units of L
    sampler: str = "flat_grid"
    samples: int = 10000
    seed: int = 0
    n_max: int = 8

    def __post_init__(self):
        if self.parameter not in ("l", "n"):
            raise ValueError("sweep parameter must be 'l' or 'n'")
        unknown = set(self.observables) - {"center", "spectrum", "fluctuation"}
        if unknown:
            raise ValueError(f"unknown observables {sorted(unknown)}")


def delta_column(d: float) -> str:
    return f"f_delta_{d:g}L"


def sweep_columns(settings: SweepSettings) -> List[str]:
    cols = ["l_over_L", "n_over_L", "rho_c_cm", "z_c_cm", "rho_c_over_L"]
    if "spectrum" in settings.observables:
        cols += ["cos_beta0", "C2", "C4"]
    if "fluctuation" in settings.observables:
        cols += [delta_column(d) for d in settings.deltas]
    return cols + ["error"]


def _sweep_row(base: FieldWaveform, value: float, index: int, settings: SweepSettings) -> Dict:
    w = base.scaled(**{settings.parameter: value * base.L})
    row = {"l_over_L": w.l / w.L, "n_over_L": w.n / w.L, "error": ""}
    try:
        rho_c, z_c = ring_center(w) if w.mode is TrapMode.STATIC_AZIMUTHAL_BIAS else find_trap_center(w)
        row.update(rho_c_cm=rho_c, z_c_cm=z_c, rho_c_over_L=rho_c / w.L)
        if "spectrum" in settings.observables:
            spec = fourier_spectrum(w, rho_c, z_c, max(settings.n_max, 4))
            row.update(cos_beta0=spec.cos_beta0, C2=spec.coefficient(2), C4=spec.coefficient(4))
        if "fluctuation" in settings.observables:
            for d in settings.deltas:
                report = fluctuation(w, (rho_c, z_c), d * w.L, settings.sampler,
                                     settings.samples, seed=settings.seed + index)
                row[delta_column(d)] = report.f
    except RingBerryError as exc:
        logger.warning("sweep point %s/L = %g failed: %s", settings.parameter, value, exc)
        row["error"] = error_code(exc)
    return row


def sweep(base: FieldWaveform, values: Iterable[float], settings: SweepSettings = SweepSettings(),
          workers: int = 1) -> pd.DataFrame:
    """
    One table row per grid value of l/L (or n/L). Failed points keep their row
    with an error code; rows come back in grid order regardless of workers.
    """
    values = list(values)
    columns = sweep_columns(settings)
    if not values:
        return pd.DataFrame(columns=columns)

    def run(item):
        index, value = item
        return _sweep_row(base, float(value), index, settings)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, enumerate(values)))
    else:
        rows = [run(item) for item in enumerate(values)]
    return pd.DataFrame(rows).reindex(columns=columns)


def fit_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of y = s x through the origin, NaN rows ignored."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    if not ok.any():
        return float("nan")
    return float(np.dot(x[ok], y[ok]) / np.dot(x[ok], x[ok]))


def sagnac_phase(mass: float, Omega_rot: float, rho_c: float, theta: float) -> float:
    """2 pi m Omega rho_c^2 cos(theta) / hbar for a ring of radius rho_c (cm)."""
    return 2.0 * np.pi * mass * Omega_rot * rho_c ** 2 * np.cos(theta) / HBAR


def sagnac_gauge(mass: float, Omega_rot: float, rho_c: float, theta: float) -> float:
    """Constant ring gauge value whose loop integral gives the Sagnac shift."""
    return mass * Omega_rot * rho_c ** 2 * np.cos(theta) / HBAR


# check -> (column, quoted value, relative tolerance)
WORKED_EXAMPLE_CHECKS = {
    "f_rho_ok": ("f_rho_Hz", 345.0, 0.05),
    "f_z_ok": ("f_z_Hz", 672.0, 0.05),
    "gamma_ok": ("gamma_over_pi", 0.2, 0.10),
}


def worked_example_report(phase_convention: Optional[str] = None,
                          atom: Atom = RB87) -> pd.DataFrame:
    """
    Trap center, frequencies and closed-loop phase of the worked TORT example
    for one or both B1 phase conventions, with pass flags against the quoted
    values (5% on frequencies, 10% on the phase).
    """
    conventions = [phase_convention] if phase_convention else ["cos", "sin"]
    rows = []
    for convention in conventions:
        w = tort_example(b1_phase=convention)
        row = {"b1_phase": convention, "error": ""}
        try:
            rho_c, z_c = find_trap_center(w)
            freqs = trap_frequencies(w, (rho_c, z_c), atom)
            c0 = cos_beta0(w, rho_c, z_c)
            row.update(rho_c_cm=rho_c, z_c_cm=z_c, f_rho_Hz=freqs.f_rho, f_z_Hz=freqs.f_z,
                       cos_beta0=c0, gamma_over_pi=berry_phase_closed(c0, 1) / np.pi)
            for check, (column, target, tol) in WORKED_EXAMPLE_CHECKS.items():
                row[check] = bool(abs(row[column] / target - 1.0) <= tol)
            row["meets_all"] = all(row[check] for check in WORKED_EXAMPLE_CHECKS)
        except RingBerryError as exc:
            row["error"] = error_code(exc)
            row["meets_all"] = False
        rows.append(row)

    table = pd.DataFrame(rows)
    passing = list(table.loc[table["meets_all"], "b1_phase"])
    if not passing:
        logger.warning("no B1 phase convention reproduces the worked example within tolerance")
    elif len(passing) < len(conventions):
        logger.warning("worked example matches only the %s convention", passing[0])
    return table
