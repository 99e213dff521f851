"""
Time-averaged trap characterization: averaged field magnitude, ring-trap
center, transverse trap frequencies and adiabaticity ratios.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .core import (
    RB87,
    Atom,
    MajoranaRiskError,
    NotAMinimumError,
    QuadratureError,
    TrapNotFormedError,
)
from .field_model import TrapMode, eval_analytic_field, trace_zero_locus, zero_locus

logger = logging.getLogger(__name__)

MIN_NODES = 64
MAX_DOUBLINGS = 10  # 64 * 2**10 = 65536 nodes


@dataclass
class QuadratureResult:
    value: np.ndarray
    nodes: int
    converged: bool
    last_change: float


def periodic_average(integrand: Callable[[np.ndarray], np.ndarray], period: float,
                     rtol: float = 1e-10, atol: float = 0.0,
                     nodes: Optional[int] = None,
                     max_doublings: int = MAX_DOUBLINGS,
                     strict: bool = True) -> QuadratureResult:
    """
    Mean of a periodic integrand over one period by the trapezoid rule.

    ``integrand`` maps a column of times (n, 1) to an array with time along
    axis 0. With ``nodes`` given the rule is applied once; otherwise the node
    count doubles from 64 until successive means differ by less than
    rtol*|mean| + atol.
    """
    def mean_on(offset: float, n: int) -> np.ndarray:
        t = (np.arange(n) + offset) * (period / n)
        return np.mean(integrand(t[:, None]), axis=0)

    if nodes is not None:
        return QuadratureResult(mean_on(0.0, nodes), nodes, True, 0.0)

    n = MIN_NODES
    mean = mean_on(0.0, n)
    change = np.inf
    for _ in range(max_doublings):
        refined = 0.5 * (mean + mean_on(0.5, n))
        n *= 2
        change = float(np.max(np.abs(refined - mean)))
        tol = float(np.max(rtol * np.abs(refined) + atol))
        mean = refined
        if change <= tol:
            return QuadratureResult(mean, n, True, change)
    if strict:
        raise QuadratureError(f"time average not converged after {n} nodes (last change {change:.3g})")
    logger.debug("time average unconverged at %d nodes (change %.3g)", n, change)
    return QuadratureResult(mean, n, False, change)


def _field_magnitude_integrand(w, rho, z):
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))

    def integrand(t):
        return eval_analytic_field(w, rho[None, :], z[None, :], t).magnitude
    return integrand


def time_avg_field_magnitude(w, rho, z, rtol: float = 1e-10, nodes: Optional[int] = None,
                             strict: bool = True):
    """(omega/2pi) * integral over one period of |B(rho, z, t)| dt, in G."""
    scalar = np.ndim(rho) == 0 and np.ndim(z) == 0
    if w.is_static:
        value = eval_analytic_field(w, rho, z, 0.0).magnitude
        return float(value) if scalar else np.asarray(value)
    result = periodic_average(_field_magnitude_integrand(w, rho, z), w.period,
                              rtol=rtol, nodes=nodes, strict=strict)
    return float(result.value[0]) if scalar else result.value


def converged_nodes(w, rho: float, z: float, rtol: float = 1e-10) -> int:
    """Node count at which the averaged magnitude converges at one point."""
    if w.is_static:
        return 1
    result = periodic_average(_field_magnitude_integrand(w, rho, z), w.period,
                              rtol=rtol, strict=False)
    return result.nodes


def zero_locus_centroid(w, samples: int = 256) -> Tuple[float, float]:
    trace = trace_zero_locus(w, samples, center=(0.0, 0.0))
    pts = trace.points()
    if len(pts) == 0:
        return 2.0 * w.L, 0.0
    return float(np.mean(pts[:, 0])), float(np.mean(pts[:, 1]))


@dataclass
class TrapSearch:
    """Outcome of the multi-start search for the time-averaged field minimum."""

    center: Tuple[float, float]
    field_average: float
    gradient: np.ndarray
    nodes: int
    box: Tuple[Tuple[float, float], Tuple[float, float]]
    starts: List[Tuple[float, float, float]]
    agreeing_starts: int


def finite_difference_gradient(fn: Callable[[float, float], float], x: np.ndarray,
                               h: float) -> np.ndarray:
    e = np.eye(2) * h
    return np.array([(fn(*(x + e[i])) - fn(*(x - e[i]))) / (2.0 * h) for i in range(2)])


def _second_differences(fn: Callable[[float, float], float], x: np.ndarray, h: float):
    f0 = fn(*x)
    e = np.eye(2) * h
    d_rr = (fn(*(x + e[0])) - 2.0 * f0 + fn(*(x - e[0]))) / h ** 2
    d_zz = (fn(*(x + e[1])) - 2.0 * f0 + fn(*(x - e[1]))) / h ** 2

    def d_r(at):
        return (fn(*(at + e[0])) - fn(*(at - e[0]))) / (2.0 * h)

    def d_z(at):
        return (fn(*(at + e[1])) - fn(*(at - e[1]))) / (2.0 * h)

    d_rz = (d_r(x + e[1]) - d_r(x - e[1])) / (2.0 * h)
    d_zr = (d_z(x + e[0]) - d_z(x - e[0])) / (2.0 * h)
    return np.array([[d_rr, d_rz], [d_zr, d_zz]])


def hessian(fn: Callable[[float, float], float], center: Tuple[float, float],
            h: float) -> np.ndarray:
    """Central-difference Hessian with one Richardson extrapolation step (h, 2h)."""
    x = np.asarray(center, dtype=float)
    fine = _second_differences(fn, x, h)
    coarse = _second_differences(fn, x, 2.0 * h)
    return (4.0 * fine - coarse) / 3.0


def _averaged_objective(w, nodes: int) -> Callable[[float, float], float]:
    def objective(rho: float, z: float) -> float:
        if rho <= 0:
            return np.inf
        return time_avg_field_magnitude(w, rho, z, nodes=None if w.is_static else nodes)
    return objective


def locate_trap(w, box_center: Optional[Tuple[float, float]] = None,
                half_width: Optional[float] = None, starts: int = 5,
                workers: int = 1) -> TrapSearch:
    """
    Multi-start Nelder-Mead search for the minimum of the averaged field,
    followed by Newton polishing on a finite-difference Hessian.
    """
    if getattr(w, "mode", TrapMode.TORT) is not TrapMode.TORT:
        raise ValueError("trap center search needs a TORT waveform")
    L = w.L
    if box_center is None:
        box_center = zero_locus_centroid(w)
    if half_width is None:
        half_width = 2.0 * L
    cx, cz = box_center
    box = ((max(cx - half_width, 1e-6 * L), cx + half_width), (cz - half_width, cz + half_width))

    nodes = min(4 * converged_nodes(w, cx, cz), MIN_NODES * 2 ** MAX_DOUBLINGS)
    objective = _averaged_objective(w, nodes)

    offsets = [(0.0, 0.0), (0.25, 0.0), (-0.25, 0.0), (0.0, 0.25), (0.0, -0.25),
               (0.25, 0.25), (-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25)]
    guesses = []
    for k in range(max(starts, 1)):
        dr, dz = offsets[k % len(offsets)]
        scale = 1.0 + k // len(offsets)
        guesses.append((float(np.clip(cx + dr * scale * L, *box[0])),
                        float(np.clip(cz + dz * scale * L, *box[1]))))

    f_scale = max(abs(objective(cx, cz)), 1e-300)

    def run(guess):
        simplex = np.array([guess, (guess[0] + 0.05 * L, guess[1]), (guess[0], guess[1] + 0.05 * L)])
        res = minimize(lambda x: objective(x[0], x[1]), np.array(guess), method="Nelder-Mead",
                       bounds=box,
                       options={"xatol": 1e-9 * L, "fatol": 1e-12 * f_scale,
                                "maxiter": 4000, "initial_simplex": simplex})
        return float(res.x[0]), float(res.x[1]), float(res.fun)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, guesses))
    else:
        results = [run(g) for g in guesses]
    # deterministic merge: best value, ties broken by the smaller radius
    results.sort(key=lambda r: (r[2], r[0]))
    best = np.array(results[0][:2])

    best = _newton_polish(objective, best, h=1e-4 * L)
    (r_lo, r_hi), (z_lo, z_hi) = box
    edge = 1e-6 * L
    if not (r_lo + edge < best[0] < r_hi - edge and z_lo + edge < best[1] < z_hi - edge):
        raise TrapNotFormedError(
            f"averaged-field minimum lies on the search box boundary at ({best[0]:.6g}, {best[1]:.6g}) cm")

    agreeing = sum(1 for r in results if np.hypot(r[0] - best[0], r[1] - best[1]) < 1e-4 * L)
    if agreeing < 2:
        logger.warning("only %d of %d starts agree on the trap center", agreeing, len(results))

    grad = finite_difference_gradient(objective, best, 1e-5 * L)
    center = (float(best[0]), float(best[1]))
    logger.debug("trap center (%.9g, %.9g) cm, <|B|> = %.9g G, %d nodes",
                 center[0], center[1], objective(*center), nodes)
    return TrapSearch(center, float(objective(*center)), grad, nodes, box, results, agreeing)


def _newton_polish(objective, x: np.ndarray, h: float, iterations: int = 6) -> np.ndarray:
    f_x = objective(*x)
    for _ in range(iterations):
        g = finite_difference_gradient(objective, x, h)
        H = hessian(objective, x, h)
        H = 0.5 * (H + H.T)
        if np.any(np.linalg.eigvalsh(H) <= 0):
            break
        step = -np.linalg.solve(H, g)
        if np.linalg.norm(step) > 10.0 * h:
            step *= 10.0 * h / np.linalg.norm(step)
        trial = x + step
        f_trial = objective(*trial)
        if not f_trial <= f_x:
            break
        x, f_x = trial, f_trial
        if np.linalg.norm(step) < 1e-12 * h:
            break
    return x


def find_trap_center(w, box_center: Optional[Tuple[float, float]] = None,
                     half_width: Optional[float] = None, starts: int = 5,
                     workers: int = 1) -> Tuple[float, float]:
    """Center (rho_c, z_c) in cm of the time-averaged ring trap."""
    return locate_trap(w, box_center, half_width, starts, workers).center


def ring_center(w) -> Tuple[float, float]:
    """Trap center for either mode; the static bias ring sits on its zero circle."""
    if getattr(w, "mode", TrapMode.TORT) is TrapMode.STATIC_AZIMUTHAL_BIAS:
        return zero_locus(w, 0.0)
    return find_trap_center(w)


@dataclass(frozen=True)
class TrapFrequencies:
    f_rho: float
    f_z: float
    cross_term: float          # d2<|B|>/drho dz, G/cm^2
    hessian: np.ndarray        # G/cm^2
    cross_asymmetry: float     # |H_rz - H_zr| / max|H|


def trap_frequencies(w, center: Tuple[float, float], atom: Atom = RB87,
                     nodes: Optional[int] = None,
                     field_average: Optional[Callable[[float, float], float]] = None,
                     step: Optional[float] = None) -> TrapFrequencies:
    """
    Transverse trap frequencies (Hz) from the curvature of the averaged Zeeman
    potential U = m_F g_F mu_B <|B|>.
    """
    L = getattr(w, "L", 0.1)
    if field_average is None:
        if nodes is None and not w.is_static:
            nodes = min(4 * converged_nodes(w, *center), MIN_NODES * 2 ** MAX_DOUBLINGS)
        field_average = _averaged_objective(w, nodes)
    H = hessian(field_average, center, step or 1e-4 * L)
    k = atom.zeeman_coefficient * np.diag(H)
    if np.any(k <= 0):
        raise NotAMinimumError(f"non-positive trap curvature {k} erg/cm^2 at {center}")
    f_rho, f_z = np.sqrt(k / atom.mass) / (2.0 * np.pi)
    asym = abs(H[0, 1] - H[1, 0]) / max(np.max(np.abs(H)), 1e-300)
    return TrapFrequencies(float(f_rho), float(f_z), float(0.5 * (H[0, 1] + H[1, 0])), H, float(asym))


@dataclass
class TrapCharacterization:
    rho_c: float
    z_c: float
    f_rho: float
    f_z: float
    potential_at_center: float
    larmor_frequency_min: float
    adiabaticity: Dict[str, Optional[float]]
    field_average: float
    min_field: float

    def as_row(self) -> Dict[str, Optional[float]]:
        return {
            "rho_c_cm": self.rho_c,
            "z_c_cm": self.z_c,
            "f_rho_Hz": self.f_rho,
            "f_z_Hz": self.f_z,
            "potential_at_center_erg": self.potential_at_center,
            "larmor_frequency_min_Hz": self.larmor_frequency_min,
            "omega_over_larmor": self.adiabaticity["omega_over_larmor"],
            "trap_over_omega": self.adiabaticity["trap_over_omega"],
        }


def minimum_field_over_period(w, center: Tuple[float, float], samples: int = 4096) -> float:
    """min over t of |B(center, t)| (G), sampled then refined by a bounded 1-D search."""
    rho, z = center
    if w.is_static:
        return float(eval_analytic_field(w, rho, z, 0.0).magnitude)
    t = np.arange(samples) * (w.period / samples)
    mags = eval_analytic_field(w, rho, z, t).magnitude
    i = int(np.argmin(mags))
    dt = w.period / samples
    res = minimize_scalar(lambda s: float(eval_analytic_field(w, rho, z, s).magnitude),
                          bounds=(t[i] - dt, t[i] + dt), method="bounded",
                          options={"xatol": 1e-9 * dt})
    return float(min(mags[i], res.fun))


def adiabaticity_report(w, center: Tuple[float, float], atom: Atom = RB87,
                        warn_above: float = 0.1) -> TrapCharacterization:
    """Trap frequencies, minimum Larmor frequency and the two adiabaticity ratios at the center."""
    freqs = trap_frequencies(w, center, atom)
    b_min = minimum_field_over_period(w, center)
    scale = max(abs(float(c)) for c in w.coefficients(0.0))
    if b_min <= 1e-12 * scale:
        raise MajoranaRiskError(f"field vanishes during the drive cycle at {center} (min |B| = {b_min:.3g} G)")
    larmor = float(atom.larmor_frequency(b_min))
    b_avg = time_avg_field_magnitude(w, *center)

    static = getattr(w, "mode", TrapMode.TORT) is TrapMode.STATIC_AZIMUTHAL_BIAS or w.is_static
    drive_hz = None if static else w.omega / (2.0 * np.pi)
    ratios: Dict[str, Optional[float]] = {
        "omega_over_larmor": None if drive_hz is None else drive_hz / larmor,
        "trap_over_omega": None if drive_hz is None else max(freqs.f_rho, freqs.f_z) / drive_hz,
    }
    for name, value in ratios.items():
        if value is None:
            logger.info("%s not applicable for a static trap", name)
        elif value > warn_above:
            logger.warning("adiabaticity ratio %s = %.3g exceeds %.3g", name, value, warn_above)
    return TrapCharacterization(center[0], center[1], freqs.f_rho, freqs.f_z,
                                float(atom.potential(b_avg)), larmor, ratios, b_avg, b_min)


def time_averaged_contours(w, rho_grid: np.ndarray, z_grid: np.ndarray,
                           nodes: int = 2048) -> np.ndarray:
    """<|B|> on a (rho, z) grid in units of B2 L^2, shape (len(rho), len(z))."""
    rr, zz = np.meshgrid(np.asarray(rho_grid, float), np.asarray(z_grid, float), indexing="ij")
    values = time_avg_field_magnitude(w, rr.ravel(), zz.ravel(), nodes=nodes, strict=False)
    return np.asarray(values).reshape(rr.shape) / (w.B2 * w.L ** 2)
