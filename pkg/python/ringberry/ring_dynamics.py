"""
One-dimensional matter-wave dynamics on the ring with the averaged gauge
potential A(phi).

Everything here is in ring units, hbar = m = rho_c = 1: time in units of
m rho_c^2 / hbar, angular velocity in hbar / (m rho_c^2), energies in
hbar^2 / (m rho_c^2). The Hamiltonian is

    H = (p - A(phi))^2 / 2 + V(phi, t),   p = -i d/dphi,

with symmetric ordering of the A p cross term. Kinetic eigenvalues on the
periodic grid are (k - A_mean)^2 / 2 for integer k. ``RingUnits`` converts
to and from seconds and rad/s.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp
from scipy.optimize import least_squares

from .core import (
    HBAR,
    GridMismatchError,
    InconsistentRunsError,
    NoOverlapError,
    SemiclassicalInvalidError,
    StepTooLargeError,
    UnfittableError,
    UnwrapNeededError,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
CFL_LIMIT = 0.1
OCCUPIED_WEIGHT = 1e-14
SEAM_ENVELOPE = 1e-8
DIFFUSION_LIMIT = 0.05
MIN_CONTRAST = 0.05
SEAM_WEIGHT = 1e-8
MAX_STEP_HALVINGS = 6


def wrap(phi):
    """Map angles onto [-pi, pi)."""
    return (np.asarray(phi, dtype=float) + np.pi) % TWO_PI - np.pi


def ring_grid(N: int) -> Tuple[np.ndarray, np.ndarray]:
    """Angles on [0, 2pi) and the matching integer angular momenta."""
    if N < 8:
        raise GridMismatchError(f"grid of {N} points is too coarse")
    return np.arange(N) * (TWO_PI / N), np.fft.fftfreq(N, d=1.0 / N)


@dataclass(frozen=True)
class RingUnits:
    """Conversion between ring units and physical units for one atom and ring."""

    mass: float     # g
    radius: float   # cm

    @property
    def time(self) -> float:
        """Seconds per ring time unit."""
        return self.mass * self.radius ** 2 / HBAR

    @property
    def angular_velocity(self) -> float:
        """rad/s per ring angular-velocity unit."""
        return HBAR / (self.mass * self.radius ** 2)

    @property
    def energy(self) -> float:
        """erg per ring energy unit."""
        return HBAR ** 2 / (self.mass * self.radius ** 2)

    def to_seconds(self, tau):
        return np.asarray(tau) * self.time

    def from_seconds(self, t):
        return np.asarray(t) / self.time

    def to_rad_per_s(self, v):
        return np.asarray(v) * self.angular_velocity

    def from_rad_per_s(self, v):
        return np.asarray(v) / self.angular_velocity


@dataclass(frozen=True)
class GaugeProfile:
    """
    Gauge potential A(phi) = constant + variation(phi).

    ``variation`` must be 2pi-periodic. Its grid mean is folded into
    ``mean_on`` so only the zero-mean part enters the gauge transform.
    """

    constant: float = 0.0
    variation: Optional[Callable[[np.ndarray], np.ndarray]] = None
    provenance: str = "constant"

    def __post_init__(self):
        if self.provenance not in ("constant", "custom", "from_cos_beta0"):
            raise ValueError(f"unknown gauge provenance {self.provenance!r}")
        if self.variation is not None:
            ends = np.asarray(self.variation(np.array([0.0, TWO_PI])), dtype=float)
            scale = max(1.0, float(np.max(np.abs(ends))))
            if abs(ends[0] - ends[1]) > 1e-12 * scale:
                raise ValueError("gauge potential is not periodic: A(0) != A(2pi)")

    @classmethod
    def uniform(cls, value: float) -> "GaugeProfile":
        return cls(float(value))

    @classmethod
    def custom(cls, fn: Callable[[np.ndarray], np.ndarray]) -> "GaugeProfile":
        return cls(0.0, fn, "custom")

    @classmethod
    def from_cos_beta0(cls, w, center: Tuple[float, float]) -> "GaugeProfile":
        """Constant gauge equal to the averaged connection at the trap center."""
        from .geometric_phase import cos_beta0
        return cls(cos_beta0(w, *center), None, "from_cos_beta0")

    @property
    def is_uniform(self) -> bool:
        return self.variation is None

    def __call__(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        if self.variation is None:
            return np.full(phi.shape, self.constant)
        return self.constant + np.asarray(self.variation(phi), dtype=float) * np.ones(phi.shape)

    def mean_on(self, N: int) -> float:
        phi, _ = ring_grid(N)
        return float(np.mean(self(phi)))

    def loop_integral(self, N: int = 4096) -> float:
        """Closed integral of A over the ring."""
        return TWO_PI * self.mean_on(N)

    def transform_phase(self, N: int) -> np.ndarray:
        """chi(phi) = integral_0^phi (A - A_mean), single valued, chi(0) = 0."""
        phi, k = ring_grid(N)
        if self.is_uniform:
            return np.zeros(N)
        a_hat = np.fft.fft(self(phi) - self.mean_on(N))
        a_hat[0] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            chi_hat = np.where(k == 0, 0.0, a_hat / (1j * np.where(k == 0, 1.0, k)))
        chi = np.fft.ifft(chi_hat).real
        return chi - chi[0]


ZERO_GAUGE = GaugeProfile()


@dataclass(frozen=True)
class RingPotential:
    """V(phi, t) with its phi-derivative, in ring energy units."""

    value: Callable[[np.ndarray, float], np.ndarray]
    gradient: Callable[[np.ndarray, float], np.ndarray]
    is_zero: bool = False

    @classmethod
    def zero(cls) -> "RingPotential":
        return cls(lambda phi, t: np.zeros(np.shape(phi)),
                   lambda phi, t: np.zeros(np.shape(phi)), is_zero=True)

    @classmethod
    def linear_in_phi(cls, v0: Callable[[float], float], v1: Callable[[float], float],
                      center: float = np.pi) -> "RingPotential":
        """V = V0(t) + V1(t) x with x = phi - center wrapped onto [-pi, pi)."""
        return cls(lambda phi, t: v0(t) + v1(t) * wrap(np.asarray(phi) - center),
                   lambda phi, t: v1(t) * np.ones(np.shape(phi)))

    @classmethod
    def harmonic(cls, omega0: float, center: float = np.pi) -> "RingPotential":
        """
        V = omega0^2 (1 - cos(phi - center)): harmonic with frequency omega0
        about ``center`` and smooth everywhere on the ring, including the
        opposite point.
        """
        return cls(lambda phi, t: omega0 ** 2 * (1.0 - np.cos(np.asarray(phi) - center)),
                   lambda phi, t: omega0 ** 2 * np.sin(np.asarray(phi) - center))


NO_POTENTIAL = RingPotential.zero()


@dataclass
class WavePacket:
    """Normalized amplitudes on the periodic grid, sum |psi|^2 dphi = 1."""

    amplitudes: np.ndarray
    gauge: GaugeProfile = ZERO_GAUGE
    time: float = 0.0
    units: Optional[RingUnits] = None

    @property
    def N(self) -> int:
        return len(self.amplitudes)

    @property
    def dphi(self) -> float:
        return TWO_PI / self.N

    @property
    def phi(self) -> np.ndarray:
        return ring_grid(self.N)[0]

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self) -> float:
        return float(np.sum(self.density) * self.dphi)

    @property
    def phi_bar(self) -> float:
        """Circular mean arg <exp(i phi)> on [0, 2pi)."""
        z = np.sum(self.density * np.exp(1j * self.phi)) * self.dphi
        return float(np.angle(z) % TWO_PI)

    @property
    def p_bar(self) -> float:
        _, k = ring_grid(self.N)
        weight = np.abs(np.fft.fft(self.amplitudes)) ** 2
        return float(np.sum(k * weight) / np.sum(weight))

    @property
    def v_bar(self) -> float:
        """<p - A(phi)>."""
        return self.p_bar - float(np.sum(self.gauge(self.phi) * self.density) * self.dphi / self.norm)

    @property
    def spread(self) -> float:
        """Standard deviation of phi about phi_bar in the wrapped coordinate."""
        x = wrap(self.phi - self.phi_bar)
        return float(np.sqrt(np.sum(x ** 2 * self.density) * self.dphi / self.norm))

    def with_amplitudes(self, amplitudes: np.ndarray, time: Optional[float] = None) -> "WavePacket":
        return replace(self, amplitudes=amplitudes, time=self.time if time is None else time)


def seam_envelope(width: float) -> float:
    """Gaussian envelope half a turn away from the packet center."""
    return float(np.exp(-np.pi ** 2 / (4.0 * width ** 2)))


def init_packet(phi0: float, v0: float, width: float, gauge: GaugeProfile = ZERO_GAUGE,
                N: int = 2048, units: Optional[RingUnits] = None) -> WavePacket:
    """
    Gaussian packet centred at phi0 with position spread ``width`` and mean
    velocity v0, dressed with the gauge prefactor exp(i int_{phi0}^{phi} A).
    """
    phi, _ = ring_grid(N)
    dphi = TWO_PI / N
    if width < 4.0 * dphi:
        raise GridMismatchError(f"width {width:.3g} rad is not resolved by {N} points")
    if seam_envelope(width) > SEAM_ENVELOPE:
        raise GridMismatchError(f"width {width:.3g} rad is not localized on the ring")
    x = wrap(phi - phi0)
    chi = gauge.transform_phase(N)
    chi0 = float(np.interp(phi0 % TWO_PI, np.append(phi, TWO_PI), np.append(chi, chi[0])))
    a_mean = gauge.mean_on(N)
    psi = np.exp(-x ** 2 / (4.0 * width ** 2) + 1j * (v0 + a_mean) * x + 1j * (chi - chi0))
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * dphi)
    return WavePacket(psi, gauge, 0.0, units)


def kinetic_eigenvalues(N: int, a_mean: float) -> np.ndarray:
    _, k = ring_grid(N)
    return 0.5 * (k - a_mean) ** 2


def max_occupied_energy(p: WavePacket, a_mean: float) -> float:
    weight = np.abs(np.fft.fft(p.amplitudes)) ** 2
    occupied = weight > OCCUPIED_WEIGHT * np.sum(weight)
    return float(np.max(kinetic_eigenvalues(p.N, a_mean)[occupied]))


def cfl_step(p: WavePacket, limit: float = 0.5 * CFL_LIMIT) -> float:
    """A time step that passes the stability guard for this packet."""
    return limit / max(max_occupied_energy(p, p.gauge.mean_on(p.N)), 1.0)


def split_step_evolve(p: WavePacket, A: Optional[GaugeProfile] = None,
                      V: RingPotential = NO_POTENTIAL, dt: float = 1e-4,
                      steps: int = 1) -> WavePacket:
    """
    Strang-split spectral propagation by ``steps`` steps of ``dt``.

    Varying A is removed by the single-valued gauge transform
    exp(i chi), leaving the uniform part A_mean in the kinetic factor. With
    V = 0 the evolution is exact and taken in one shot.
    """
    if steps < 0 or dt < 0:
        raise ValueError("steps and dt must be non-negative")
    gauge = p.gauge if A is None else A
    N = p.N
    phi, _ = ring_grid(N)
    a_mean = gauge.mean_on(N)
    chi = gauge.transform_phase(N)
    kinetic = kinetic_eigenvalues(N, a_mean)

    psi = np.exp(-1j * chi) * p.amplitudes
    t0 = p.time
    total = dt * steps
    if V.is_zero:
        psi = np.fft.ifft(np.exp(-1j * kinetic * total) * np.fft.fft(psi))
    elif steps:
        norm_in = np.sum(np.abs(psi) ** 2)
        kick = np.exp(-1j * kinetic * dt)
        for i in range(steps):
            t = t0 + i * dt
            psi = psi * np.exp(-0.5j * dt * V.value(phi, t))
            spectrum = np.fft.fft(psi)
            # guard on the current spectrum, which the kicks keep widening
            weight = np.abs(spectrum) ** 2
            e_max = float(np.max(kinetic[weight > OCCUPIED_WEIGHT * np.sum(weight)]))
            if dt * e_max >= CFL_LIMIT:
                raise StepTooLargeError(f"dt*E_max = {dt * e_max:.3g} exceeds {CFL_LIMIT} "
                                        f"at t = {t:.4g}")
            psi = np.fft.ifft(kick * spectrum)
            psi = psi * np.exp(-0.5j * dt * V.value(phi, t + dt))
        # undo FFT rounding drift; every factor is unitary
        psi *= np.sqrt(norm_in / np.sum(np.abs(psi) ** 2))
    psi = np.exp(1j * chi) * psi
    return WavePacket(psi, gauge, t0 + total, p.units)


def evolve_to(p: WavePacket, t_final: float, V: RingPotential = NO_POTENTIAL,
              dt: Optional[float] = None, A: Optional[GaugeProfile] = None) -> WavePacket:
    """
    Whole steps of dt up to t_final followed by one fractional step. Without
    an explicit dt the step starts at ``cfl_step`` and is halved whenever the
    stability guard trips.
    """
    span = t_final - p.time
    if span < 0:
        raise ValueError("cannot evolve backwards")
    if V.is_zero:
        return split_step_evolve(p, A, V, span, 1)
    if dt is not None:
        return _evolve_fixed(p, t_final, V, dt, A)
    dt = cfl_step(p)
    for halving in range(MAX_STEP_HALVINGS + 1):
        try:
            return _evolve_fixed(p, t_final, V, dt, A)
        except StepTooLargeError as exc:
            if halving == MAX_STEP_HALVINGS:
                raise
            logger.info("halving dt to %.4g: %s", 0.5 * dt, exc)
            dt *= 0.5


def _evolve_fixed(p: WavePacket, t_final: float, V: RingPotential, dt: float,
                  A: Optional[GaugeProfile]) -> WavePacket:
    span = t_final - p.time
    whole = int(np.floor(span / dt))
    out = split_step_evolve(p, A, V, dt, whole)
    rest = t_final - out.time
    if rest > 0:
        out = split_step_evolve(out, A, V, rest, 1)
    return out


def overlap(a: WavePacket, b: WavePacket) -> float:
    """|<a|b>|."""
    if a.N != b.N:
        raise GridMismatchError(f"grids differ: {a.N} vs {b.N}")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) * a.dphi)


@dataclass
class ClassicalTrajectory:
    times: np.ndarray
    phi_bar: np.ndarray     # unwrapped
    p_bar: np.ndarray
    v_bar: np.ndarray
    action: np.ndarray      # cumulative int L dt


def classical_trajectory(phi0: float, v0: float, V: RingPotential = NO_POTENTIAL,
                         A: GaugeProfile = ZERO_GAUGE, t_final: float = 1.0,
                         dt: float = 1e-3) -> ClassicalTrajectory:
    """
    Velocity-Verlet integration of dphi/dt = v, dv/dt = -V'(phi, t). The
    canonical momentum p = v + A(phi) and the action with Lagrangian
    v^2/2 + A v - V are recorded along the way.
    """
    if dt <= 0 or t_final < 0:
        raise ValueError("need dt > 0 and t_final >= 0")
    steps = int(np.ceil(t_final / dt - 1e-12))
    times = np.linspace(0.0, t_final, steps + 1)
    h = t_final / steps if steps else 0.0
    phi = np.empty(steps + 1)
    vel = np.empty(steps + 1)
    phi[0], vel[0] = phi0, v0
    force = -float(V.gradient(np.array(phi0), 0.0))
    for i in range(steps):
        half = vel[i] + 0.5 * h * force
        phi[i + 1] = phi[i] + h * half
        force = -float(V.gradient(np.array(phi[i + 1]), times[i + 1]))
        vel[i + 1] = half + 0.5 * h * force
    gauge_along = A(phi % TWO_PI)
    potential = np.array([float(V.value(np.array(x), t)) for x, t in zip(phi, times)])
    lagrangian = 0.5 * vel ** 2 + gauge_along * vel - potential
    action = cumulative_trapezoid(lagrangian, times, initial=0.0)
    return ClassicalTrajectory(times, phi, vel + gauge_along, vel, action)


@dataclass(frozen=True)
class WeiNormanParams:
    """exp(-i a p^2) exp(-i b p) exp(-i c x) exp(-i d) at each time."""

    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray


def wei_norman_params(v0: Callable[[float], float], v1: Callable[[float], float],
                      t_final: float, samples: int = 2) -> WeiNormanParams:
    """
    a = t/2, c = int V1, b = int t V1, d = int (V0 + b V1), integrated with
    an explicit high-order Runge-Kutta scheme.
    """
    times = np.linspace(0.0, t_final, max(samples, 2))
    if t_final == 0:
        zeros = np.zeros_like(times)
        return WeiNormanParams(times, zeros, zeros, zeros, zeros)

    def rhs(t, y):
        b = y[0]
        return [t * v1(t), v1(t), v0(t) + b * v1(t)]

    sol = solve_ivp(rhs, (0.0, t_final), [0.0, 0.0, 0.0], method="DOP853",
                    t_eval=times, rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise RuntimeError(f"Wei-Norman parameter integration failed: {sol.message}")
    return WeiNormanParams(times, 0.5 * times, sol.y[0], sol.y[1], sol.y[2])


def seam_weight(p: WavePacket, center: float, margin: float = 0.1 * np.pi) -> float:
    """Probability within ``margin`` of the cut of the coordinate x = phi - center."""
    x = wrap(p.phi - center)
    return float(np.sum(p.density[np.abs(x) > np.pi - margin]) * p.dphi)


def wei_norman_propagate(p: WavePacket, V0: Callable[[float], float],
                         V1: Callable[[float], float], t_final: float,
                         center: float = np.pi) -> WavePacket:
    """
    Closed-form evolution under V = V0(t) + V1(t) x, x = phi - center wrapped.

    The packet must stay clear of the coordinate cut at center + pi.
    """
    if seam_weight(p, center) > SEAM_WEIGHT:
        raise UnwrapNeededError("packet reaches the coordinate cut before propagation")
    params = wei_norman_params(V0, V1, t_final)
    a, b, c, d = params.a[-1], params.b[-1], params.c[-1], params.d[-1]
    N = p.N
    phi, k = ring_grid(N)
    a_mean = p.gauge.mean_on(N)
    chi = p.gauge.transform_phase(N)
    x = wrap(phi - center)
    kq = k - a_mean

    psi = np.exp(-1j * chi) * p.amplitudes
    psi = np.exp(-1j * d) * np.exp(-1j * c * x) * psi
    psi = np.fft.ifft(np.exp(-1j * (b * kq + a * kq ** 2)) * np.fft.fft(psi))
    out = WavePacket(np.exp(1j * chi) * psi, p.gauge, p.time + t_final, p.units)
    if seam_weight(out, center) > SEAM_WEIGHT:
        raise UnwrapNeededError("packet crosses the coordinate cut during propagation")
    return out


def diffusion_growth(width: float, t: float) -> float:
    """Relative width growth sqrt(1 + (t / 2 width^2)^2) - 1 of a free Gaussian."""
    return float(np.sqrt(1.0 + (t / (2.0 * width ** 2)) ** 2) - 1.0)


def semiclassical_propagate(p: WavePacket, traj: ClassicalTrajectory,
                            A: Optional[GaugeProfile] = None) -> WavePacket:
    """
    Translate the initial packet along the classical path, boost it by the
    momentum change and attach the classical action phase. The packet shape
    is frozen, so against the exact evolution the overlap falls off as
    (1 + (t / 2 width^2)^2)^(-1/4); the growth guard keeps it above about
    0.976, and a 0.999 fidelity needs t below roughly 0.13 width^2.
    """
    t = float(traj.times[-1])
    width = p.spread
    growth = diffusion_growth(width, t)
    if growth >= DIFFUSION_LIMIT:
        raise SemiclassicalInvalidError(f"packet width grows by {growth:.1%} over t = {t:.4g}")
    gauge = p.gauge if A is None else A
    phi, k = ring_grid(p.N)
    shift = float(traj.phi_bar[-1] - traj.phi_bar[0])
    moved = np.fft.ifft(np.exp(-1j * k * shift) * np.fft.fft(p.amplitudes))
    boost = float(traj.p_bar[-1] - traj.p_bar[0])
    x_t = wrap(phi - traj.phi_bar[-1])
    psi = np.exp(1j * traj.action[-1]) * np.exp(1j * boost * x_t) * moved
    return WavePacket(psi, gauge, p.time + t, p.units)


@dataclass
class InterferenceResult:
    phi: np.ndarray
    density: np.ndarray
    packet_densities: Tuple[np.ndarray, np.ndarray]
    fringe_wavenumber: float
    fringe_phase: float
    fringe_contrast: float
    extracted_gamma: float
    xi: float
    overlap_time: float
    overlap_angle: float
    loop_integral: float
    v_bar: Tuple[float, float]
    N: int
    dt: float
    note: str = "extracted_gamma is reported on (-pi, pi]; unwrap against the loop integral of A"

    def table(self) -> Dict[str, np.ndarray]:
        return {"phi_rad": self.phi, "density": self.density,
                "n_plus": self.packet_densities[0], "n_minus": self.packet_densities[1]}


def wrap_phase(angle: float) -> float:
    """Map onto (-pi, pi]."""
    w = float(wrap(angle))
    return np.pi if w == -np.pi else w


def find_overlap_time(plus: WavePacket, minus: WavePacket, V: RingPotential,
                      dt: float, t_max: float) -> float:
    """
    Time T at which the unwrapped separation of the packet centres reaches
    2pi, interpolated quadratically through the last three steps.
    """
    times = [0.0]
    separation = [0.0]
    last = (plus.phi_bar, minus.phi_bar)
    sep = 0.0
    t = 0.0
    while sep < TWO_PI:
        if t >= t_max:
            raise NoOverlapError(f"packets did not re-overlap within t = {t_max:.4g}")
        plus = split_step_evolve(plus, None, V, dt, 1)
        minus = split_step_evolve(minus, None, V, dt, 1)
        t = plus.time
        now = (plus.phi_bar, minus.phi_bar)
        sep += float(wrap(now[0] - last[0]) - wrap(now[1] - last[1]))
        last = now
        times.append(t)
        separation.append(sep)
    ts = np.array(times[-3:]) if len(times) >= 3 else np.array(times)
    ss = np.array(separation[-3:]) if len(times) >= 3 else np.array(separation)
    coeffs = np.polyfit(ts - ts[-1], ss - TWO_PI, len(ts) - 1)
    roots = np.roots(coeffs)
    lo = ts[-2] - ts[-1]
    real = [r.real for r in roots if abs(r.imag) < 1e-12 and lo - 1e-12 <= r.real <= 1e-12]
    if not real:
        # linear fallback between the bracketing steps
        frac = (TWO_PI - ss[-2]) / (ss[-1] - ss[-2])
        return float(ts[-2] + frac * (ts[-1] - ts[-2]))
    return float(ts[-1] + real[0])


def _fit_fringes(x: np.ndarray, n: np.ndarray, n_plus: np.ndarray, n_minus: np.ndarray,
                 k_seed: float) -> Tuple[float, float, float]:
    """Fit n - n_plus - n_minus = 2 C sqrt(n_plus n_minus) cos(K x + theta)."""
    envelope = np.sqrt(n_plus * n_minus)
    mask = envelope > 1e-3 * np.max(envelope)
    if mask.sum() < 8:
        raise UnfittableError("packets do not overlap on the grid")
    xm, env, cross = x[mask], envelope[mask], (n - n_plus - n_minus)[mask]

    z = np.sum(cross * np.exp(-1j * k_seed * xm))
    seed = np.array([abs(z) / np.sum(env), k_seed, np.angle(z)])

    def residual(params):
        c, k, theta = params
        return cross - 2.0 * c * env * np.cos(k * xm + theta)

    fit = least_squares(residual, seed, x_scale=np.array([1.0, max(abs(k_seed), 1.0), 1.0]),
                        xtol=1e-14, ftol=1e-14, gtol=1e-14)
    c, k, theta = fit.x
    if c < 0:
        c, theta = -c, theta + np.pi
    return float(c), float(k), wrap_phase(theta)


@dataclass(frozen=True)
class _PairRun:
    plus: WavePacket
    minus: WavePacket
    total: np.ndarray
    contrast: float
    wavenumber: float
    phase: float


def _run_pair(gauge: GaugeProfile, V: RingPotential, v0: float, width: float, N: int,
              T: float, dt: float, x: np.ndarray) -> _PairRun:
    plus = evolve_to(init_packet(0.0, v0, width, gauge, N), T, V, dt)
    minus = evolve_to(init_packet(0.0, -v0, width, gauge, N), T, V, dt)
    total = plus.amplitudes + minus.amplitudes
    total /= np.sqrt(np.sum(np.abs(total) ** 2) * (TWO_PI / N))
    n = np.abs(total) ** 2
    # normalize the packet densities the same way so n = n+ + n- + cross term
    scale = 1.0 / np.sum(np.abs(plus.amplitudes + minus.amplitudes) ** 2 * (TWO_PI / N))
    n_plus, n_minus = scale * plus.density, scale * minus.density
    c, k, theta = _fit_fringes(x, n, n_plus, n_minus, plus.v_bar - minus.v_bar)
    if c < MIN_CONTRAST:
        raise UnfittableError(f"fringe contrast {c:.3g} below {MIN_CONTRAST}")
    return _PairRun(plus, minus, n, c, k, theta)


def _run_with_reference(A: GaugeProfile, V: RingPotential, v0: float, width: float, N: int,
                        dt: float, t_max: float) -> Tuple[float, _PairRun, float]:
    """Overlap time, the run with A and xi, all at one dt."""
    T = find_overlap_time(init_packet(0.0, v0, width, A, N),
                          init_packet(0.0, -v0, width, A, N), V, dt, t_max)
    phi, _ = ring_grid(N)
    x = wrap(phi - np.pi)
    run = _run_pair(A, V, v0, width, N, T, dt, x)
    # for A = 0 the run is its own reference
    if A.is_uniform and A.constant == 0.0:
        return T, run, run.phase
    return T, run, _run_pair(ZERO_GAUGE, V, v0, width, N, T, dt, x).phase


def run_interference(A: GaugeProfile, V: RingPotential = NO_POTENTIAL, v0: float = 20.0,
                     width: float = 0.25, N: int = 2048, dt: Optional[float] = None,
                     t_max: Optional[float] = None) -> InterferenceResult:
    """
    Two counter-propagating packets leave phi = 0, meet again at phi = pi and
    interfere. The fringe phase of the run with A is compared with the A = 0
    reference evolution (its phase is xi) to extract the geometric shift.
    Without an explicit dt the whole computation is repeated with dt halved
    until the stability guard holds, so both runs share one step.
    """
    v0 = abs(v0)
    if v0 == 0:
        raise NoOverlapError("packets at rest never re-overlap")
    if N / (2.0 * v0) < 8:
        raise GridMismatchError(f"fewer than 8 grid points per fringe at N={N}, v0={v0}")
    if t_max is None:
        t_max = 4.0 * np.pi / v0
    if dt is not None:
        T, run, xi = _run_with_reference(A, V, v0, width, N, dt, t_max)
    else:
        dt = cfl_step(init_packet(0.0, v0, width, A, N))
        for halving in range(MAX_STEP_HALVINGS + 1):
            try:
                T, run, xi = _run_with_reference(A, V, v0, width, N, dt, t_max)
                break
            except StepTooLargeError as exc:
                if halving == MAX_STEP_HALVINGS:
                    raise
                logger.info("halving dt to %.4g: %s", 0.5 * dt, exc)
                dt *= 0.5

    phi, _ = ring_grid(N)
    meet = run.plus.phi_bar
    if abs(float(wrap(meet - np.pi))) > 0.25 * width:
        logger.warning("packets met at %.4f rad rather than pi", meet)
    gamma = wrap_phase(run.phase - xi)
    logger.debug("interference: T=%.6g, K=%.6g, C=%.4f, theta=%.6f, xi=%.6f",
                 T, run.wavenumber, run.contrast, run.phase, xi)
    return InterferenceResult(phi, run.total, (run.plus.density, run.minus.density),
                              run.wavenumber, run.phase, run.contrast, gamma, xi, T, meet,
                              A.loop_integral(N), (run.plus.v_bar, run.minus.v_bar), N, dt)


def extract_fringe_shift(with_A: InterferenceResult, without_A: InterferenceResult,
                         tolerance: float = 1e-8) -> float:
    """
    Fringe-phase difference of two runs, unwrapped towards the difference of
    their gauge loop integrals. Both runs must share grid and packet envelopes.
    """
    if with_A.N != without_A.N:
        raise GridMismatchError(f"runs use different grids: {with_A.N} vs {without_A.N}")
    for a, b in zip(with_A.packet_densities, without_A.packet_densities):
        if np.max(np.abs(a - b)) > tolerance * max(np.max(a), 1e-300):
            raise InconsistentRunsError("per-packet densities differ between the runs")
    predicted = with_A.loop_integral - without_A.loop_integral
    raw = with_A.fringe_phase - without_A.fringe_phase
    return float(raw + TWO_PI * np.round((predicted - raw) / TWO_PI))


def convergence_check(A: GaugeProfile, V: RingPotential = NO_POTENTIAL, v0: float = 20.0,
                      width: float = 0.25, N: int = 2048,
                      dt: Optional[float] = None) -> Dict[str, float]:
    """extracted_gamma at (N, dt) and (2N, dt/2) and their difference."""
    coarse = run_interference(A, V, v0, width, N, dt)
    fine = run_interference(A, V, v0, width, 2 * N, coarse.dt / 2.0)
    return {"gamma": coarse.extracted_gamma, "gamma_refined": fine.extracted_gamma,
            "change": abs(wrap_phase(fine.extracted_gamma - coarse.extracted_gamma))}
