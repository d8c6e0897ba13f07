"""Retarded Green function u(t) and thermal fluctuation v(t).

u obeys  du/dt + i omega_c u + int_0^t g(t - tau) u(tau) dtau = 0,  u(0) = 1,
v(t) = int_0^t dtau1 int_0^t dtau2 u*(tau1) gtilde(tau1 - tau2) u(tau2).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, find_peaks

from boundstate import app_settings
from boundstate.errors import ConsistencyError, SolverInstabilityError
from boundstate.spectral import BathSpec, SpectralModel, eval_nbar, tabulate_g, tabulate_gtilde

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = t0 + k*dt, k = 0..n"""

    dt: float
    n: int
    t0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise ValueError(f"Time step must be positive and finite, got {self.dt}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"A time grid needs at least one step, got n={self.n}")

    @classmethod
    def from_horizon(cls, horizon: float, dt: float | None = None) -> "TimeGrid":
        """Grid covering [0, horizon] with step ``dt`` (default from settings)"""
        dt = app_settings.BOUNDSTATE_DEFAULT_DT if dt is None else dt
        if not dt > 0:
            raise ValueError(f"Time step must be positive, got {dt}")
        return cls(dt=float(dt), n=max(1, int(math.ceil(horizon / dt - 1e-9))))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n + 1)

    @property
    def horizon(self) -> float:
        return self.t0 + self.dt * self.n


@dataclass(frozen=True)
class EvolutionProblem:
    """A cavity of frequency omega_c coupled to a reservoir at a given temperature"""

    omega_c: float
    model: SpectralModel
    bath: BathSpec
    grid: TimeGrid

    def __post_init__(self):
        if not math.isfinite(self.omega_c):
            raise ValueError(f"Cavity frequency must be finite, got {self.omega_c}")

    @property
    def g(self) -> np.ndarray:
        """g(k*dt), k = 0..n, from the kernel cache"""
        return tabulate_g(self.model, self.grid.dt, self.grid.n)

    @property
    def gtilde(self) -> np.ndarray:
        """gtilde(k*dt), k = 0..n, from the kernel cache"""
        return tabulate_gtilde(self.model, self.bath, self.grid.dt, self.grid.n)

    @property
    def gtilde_negative(self) -> np.ndarray:
        """gtilde(-k*dt), k = 0..n, tabulated independently of the positive lags"""
        return tabulate_gtilde(self.model, self.bath, self.grid.dt, self.grid.n, sign=-1)


@dataclass(frozen=True)
class GreenTrajectory:
    """Samples of u(t) on a time grid"""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.shape != (self.grid.n + 1,):
            raise ValueError(f"Expected {self.grid.n + 1} samples, got {samples.shape}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.samples)

    def at(self, t: float) -> complex:
        """Linear interpolation of u at time ``t`` inside the grid"""
        times = self.times
        if not times[0] - 1e-12 <= t <= times[-1] + 1e-12:
            raise ValueError(f"t={t} outside [{times[0]}, {times[-1]}]")
        re = np.interp(t, times, self.samples.real)
        im = np.interp(t, times, self.samples.imag)
        return complex(re, im)


@dataclass(frozen=True)
class FluctuationTrajectory:
    """Samples of v(t) on a time grid"""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.shape != (self.grid.n + 1,):
            raise ValueError(f"Expected {self.grid.n + 1} samples, got {samples.shape}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def at(self, t: float) -> float:
        """Linear interpolation of v at time ``t``"""
        return float(np.interp(t, self.times, self.samples))


def solve_u(problem: EvolutionProblem) -> GreenTrajectory:
    """
    Integrate the Green-function equation with a Heun predictor-corrector.

    The memory integral uses the trapezoidal rule and the equation is integrated
    in the frame rotating at the model's reference frequency; both are second
    order in dt. u[0] = 1 exactly.

    Raises:
        SolverInstabilityError: when |u| exceeds 1 + divergence threshold
    """
    grid = problem.grid
    dt, n = grid.dt, grid.n
    if problem.model.is_null:
        logger.info("Null reservoir: free evolution at omega_c=%g", problem.omega_c)
        u = np.exp(-1j * problem.omega_c * (grid.times - grid.t0))
        u[0] = 1.0
        return GreenTrajectory(grid, u)

    omega_r = problem.model.reference_frequency
    detuning = problem.omega_c - omega_r
    lags = dt * np.arange(n + 1)
    kernel = np.asarray(problem.g) * np.exp(1j * omega_r * lags)
    reversed_kernel = kernel[::-1].copy()
    limit = 1.0 + app_settings.BOUNDSTATE_DIVERGENCE_THRESHOLD

    logger.info(
        "Solving u on %d steps (dt=%g, omega_c=%g, %s)",
        n,
        dt,
        problem.omega_c,
        problem.model.cache_key,
    )

    u = np.empty(n + 1, dtype=complex)
    u[0] = 1.0
    rate = -1j * detuning * u[0]
    for m in range(n):
        # sum_{j=0}^{m} k_{m+1-j} u_j
        history = np.dot(reversed_kernel[n - m - 1 : n], u[: m + 1])
        strip = history - 0.5 * kernel[m + 1] * u[0]
        predicted = u[m] + dt * rate
        rate_predicted = -1j * detuning * predicted - dt * (strip + 0.5 * kernel[0] * predicted)
        u[m + 1] = u[m] + 0.5 * dt * (rate + rate_predicted)
        if not abs(u[m + 1]) <= limit:
            raise SolverInstabilityError(
                f"|u| = {abs(u[m + 1]):.6g} exceeds {limit} at step {m + 1}",
                step=m + 1,
                time=float(grid.t0 + (m + 1) * dt),
                magnitude=float(abs(u[m + 1])),
            )
        rate = -1j * detuning * u[m + 1] - dt * (strip + 0.5 * kernel[0] * u[m + 1])

    u *= np.exp(-1j * omega_r * lags)
    u[0] = 1.0
    logger.info("Solved u: |u(t_end)| = %.6g", abs(u[-1]))
    return GreenTrajectory(grid, u)


def _memory_series(kernel: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoidal int_0^{t_m} kernel(t_m - tau) u(tau) dtau for every m"""
    full = fftconvolve(kernel, u)[: len(u)]
    memory = dt * (full - 0.5 * kernel * u[0] - 0.5 * kernel[0] * u)
    memory[0] = 0.0
    return memory


def _memory_at(kernel: np.ndarray, u: np.ndarray, dt: float, k: int) -> complex:
    if k == 0:
        return 0.0j
    weights = np.ones(k + 1)
    weights[0] = weights[-1] = 0.5
    return dt * np.dot(kernel[k::-1] * weights, u[: k + 1])


def udot(problem: EvolutionProblem, u: GreenTrajectory, k: int) -> complex:
    """du/dt at grid index ``k`` from the equation of motion, not by differencing"""
    samples = u.samples
    memory = _memory_at(np.asarray(problem.g), samples, problem.grid.dt, k)
    return -1j * problem.omega_c * samples[k] - memory


def vdot(problem: EvolutionProblem, u: GreenTrajectory, k: int) -> float:
    """dv/dt = 2 Re[u*(t) int_0^t gtilde(t - tau) u(tau) dtau] at grid index ``k``"""
    if problem.bath.theta == 0:
        return 0.0
    samples = u.samples
    memory = _memory_at(np.asarray(problem.gtilde), samples, problem.grid.dt, k)
    return 2.0 * float(np.real(np.conj(samples[k]) * memory))


def udot_series(problem: EvolutionProblem, u: GreenTrajectory) -> np.ndarray:
    """udot at every grid point"""
    samples = u.samples
    return -1j * problem.omega_c * samples - _memory_series(np.asarray(problem.g), samples, problem.grid.dt)


def vdot_series(problem: EvolutionProblem, u: GreenTrajectory) -> np.ndarray:
    """vdot at every grid point"""
    if problem.bath.theta == 0:
        return np.zeros(problem.grid.n + 1)
    samples = u.samples
    memory = _memory_series(np.asarray(problem.gtilde), samples, problem.grid.dt)
    return 2.0 * np.real(np.conj(samples) * memory)


def solve_v(problem: EvolutionProblem, u: GreenTrajectory) -> FluctuationTrajectory:
    """
    Evaluate the double integral for v(t) by an incremental trapezoidal double sum.

    Each step adds the boundary strip of the square [0, t_k]^2 using both the
    positive and the negative lags of gtilde, O(k) work per step.

    Raises:
        ConsistencyError: if the accumulated sum has an imaginary part above tolerance
    """
    if u.grid != problem.grid:
        raise ValueError("u must be solved on the problem grid")

    grid = problem.grid
    n, dt = grid.n, grid.dt
    if problem.bath.theta == 0:
        return FluctuationTrajectory(grid, np.zeros(n + 1))

    a = np.asarray(u.samples)
    forward = np.asarray(problem.gtilde)
    backward = np.asarray(problem.gtilde_negative)
    reversed_forward = forward[::-1].copy()
    reversed_backward = backward[::-1].copy()
    g0 = forward[0]
    tolerance = app_settings.BOUNDSTATE_IMAGINARY_RESIDUE

    # weights b_j: 1/2 at j = 0, 1 elsewhere; the right endpoint is corrected per step
    b_a = a.copy()
    b_a[0] *= 0.5
    b_a_conj = np.conj(b_a)

    v = np.zeros(n + 1, dtype=complex)
    total = 0.25 * g0 * abs(a[0]) ** 2
    for k in range(1, n + 1):
        # q_k = sum_{j<k} b_j gtilde(t_k - t_j) a_j,  r_k = sum_{j<k} b_j a_j* gtilde(t_j - t_k) a_k
        q = np.dot(reversed_forward[n - k : n], b_a[:k])
        r = np.dot(b_a_conj[:k], reversed_backward[n - k : n]) * a[k]
        left = np.conj(a[k]) * q
        total += left + r + g0 * abs(a[k]) ** 2
        v[k] = dt * dt * (total - 0.5 * (left + r) - 0.75 * g0 * abs(a[k]) ** 2)

    residue = np.max(np.abs(v.imag))
    if residue > tolerance:
        worst = int(np.argmax(np.abs(v.imag)))
        raise ConsistencyError(
            f"v(t) has an imaginary residue {residue:.3g} above {tolerance:g}",
            step=worst,
            residue=float(residue),
        )

    values = v.real
    floor = -app_settings.BOUNDSTATE_SOLVER_EPS
    if values.min() < floor:
        logger.warning("v(t) dips to %.3g below zero", values.min())
    logger.info("Solved v: v(t_end) = %.6g", values[-1])
    return FluctuationTrajectory(grid, values)


def normalized_fluctuation(v: FluctuationTrajectory, bath: BathSpec, omega_ref: float) -> np.ndarray:
    """v(t) / nbar(omega_ref); tends to 1 when the cavity thermalizes"""
    nbar = eval_nbar(bath, omega_ref)
    if nbar == 0:
        raise ValueError("Normalized fluctuation is undefined at zero temperature")
    return v.samples / nbar


def fit_markov_parameters(u: GreenTrajectory, omega_c: float, t_min: float, t_max: float) -> tuple[float, float]:
    """
    Least-squares fit of u(t) ~ exp(-i (omega_c + shift) t - rate t) on [t_min, t_max].

    Returns:
        (rate, shift)
    """
    times = u.times
    window = (times >= t_min) & (times <= t_max)
    if window.sum() < 2:
        raise ValueError(f"Fit window [{t_min}, {t_max}] holds fewer than two samples")
    t = times[window]
    samples = u.samples[window]
    rate = -np.polyfit(t, np.log(np.abs(samples)), 1)[0]
    phase = np.unwrap(np.angle(samples * np.exp(1j * omega_c * t)))
    shift = -np.polyfit(t, phase, 1)[0]
    return float(rate), float(shift)


def oscillation_peaks(u: GreenTrajectory, t_min: float) -> tuple[np.ndarray, np.ndarray]:
    """Times and heights of the local maxima of |u(t)| after ``t_min``"""
    times = u.times
    window = times >= t_min
    magnitude = u.magnitude[window]
    peaks, _ = find_peaks(magnitude)
    return times[window][peaks], magnitude[peaks]


def late_time_summary(
    u: GreenTrajectory, v: FluctuationTrajectory, problem: EvolutionProblem, window_fraction: float = 0.5
) -> dict:
    """
    Late-window statistics of u and v.

    Reports the largest local maximum of |u|, the mean spacing of the maxima
    (the envelope period), the fitted Markov rate and shift, and v at the end of
    the run, normalized by the occupation at the reference frequency when the
    bath is hot.
    """
    t_start = problem.grid.t0 + (1 - window_fraction) * (problem.grid.horizon - problem.grid.t0)
    peak_times, peak_heights = oscillation_peaks(u, t_start)
    summary = {
        "t_window_start": float(t_start),
        "abs_u_end": float(abs(u.samples[-1])),
        "min_abs_u": float(u.magnitude.min()),
        "peak_count": int(len(peak_times)),
        "peak_abs_u_mean": float(peak_heights.mean()) if len(peak_heights) else None,
        "oscillation_period": float(np.mean(np.diff(peak_times))) if len(peak_times) > 1 else None,
        "v_end": float(v.samples[-1]),
        "v_end_normalized": None,
    }

    if np.all(u.magnitude[u.times >= t_start] > 0):
        rate, shift = fit_markov_parameters(u, problem.omega_c, t_start, problem.grid.horizon)
        summary["fitted_rate"] = rate
        summary["fitted_shift"] = shift

    if problem.bath.theta > 0:
        reference = problem.model.reference_frequency or problem.omega_c
        summary["v_end_normalized"] = float(v.samples[-1] / eval_nbar(problem.bath, reference))
    return summary
