"""Exact master-equation coefficients and a truncated Fock-space propagator.

    drho/dt = -i w'(t) [a^+ a, rho]
              + gamma(t) (2 a rho a^+ - a^+ a rho - rho a^+ a)
              + gamma~(t) (a rho a^+ + a^+ rho a - a^+ a rho - rho a a^+)

with w' = -Im(udot/u), gamma = -Re(udot/u), gamma~ = vdot - 2 v Re(udot/u).
The propagator is an independent check of the analytic phase-space results.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from boundstate import app_settings
from boundstate.errors import ConsistencyError, SingularWindowError, StepSizeError, TruncationError
from boundstate.greenfn import (
    EvolutionProblem,
    FluctuationTrajectory,
    GreenTrajectory,
    TimeGrid,
    udot_series,
    vdot_series,
)
from boundstate.wigner import CatState, CoherentSuperposition

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoefficientTrajectory:
    """Master-equation coefficients sampled on a time grid"""

    grid: TimeGrid
    omega_prime: np.ndarray
    gamma: np.ndarray
    gamma_tilde: np.ndarray
    singular_flags: np.ndarray

    def __post_init__(self):
        shape = (self.grid.n + 1,)
        for name in ("omega_prime", "gamma", "gamma_tilde", "singular_flags"):
            values = np.asarray(getattr(self, name), dtype=bool if name == "singular_flags" else float)
            if values.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {values.shape}")
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def first_singular_index(self, stop: int | None = None) -> int | None:
        """Index of the first flagged sample up to ``stop`` (inclusive), or None"""
        flags = self.singular_flags if stop is None else self.singular_flags[: stop + 1]
        hits = np.flatnonzero(flags)
        return int(hits[0]) if hits.size else None


def coefficients(u: GreenTrajectory, v: FluctuationTrajectory, problem: EvolutionProblem) -> CoefficientTrajectory:
    """
    Master-equation coefficients from u and v.

    udot and vdot come from the equations of motion. Samples where |u| drops
    below the singular threshold are flagged; their values are kept as computed.
    """
    if u.grid != problem.grid or v.grid != problem.grid:
        raise ValueError("u and v must be sampled on the problem grid")

    samples = u.samples
    du = udot_series(problem, u)
    dv = vdot_series(problem, u)
    flags = np.abs(samples) < app_settings.BOUNDSTATE_SINGULAR_U

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = du / samples
    omega_prime = -ratio.imag
    gamma = -ratio.real
    gamma_tilde = dv - 2 * v.samples * ratio.real
    if problem.bath.theta == 0:
        gamma_tilde = np.zeros_like(gamma_tilde)

    if flags.any():
        logger.info(
            "Coefficients singular at %d samples, first at t=%g",
            int(flags.sum()),
            float(u.times[np.argmax(flags)]),
        )
    return CoefficientTrajectory(problem.grid, omega_prime, gamma, gamma_tilde, flags)


def certified_window(coeffs: CoefficientTrajectory) -> int:
    """Last grid index before the first singular sample; the whole grid when none is flagged"""
    first = coeffs.first_singular_index()
    if first is None:
        return coeffs.grid.n
    return first - 1


@dataclass(frozen=True)
class FockDensityMatrix:
    """Density matrix in the Fock basis |0>..|n_max>"""

    matrix: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 2:
            raise ValueError(f"Density matrix must be square with dimension >= 2, got {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_ket(cls, ket: np.ndarray, time: float = 0.0) -> "FockDensityMatrix":
        ket = np.asarray(ket, dtype=complex)
        return cls(np.outer(ket, ket.conj()), time)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_max(self) -> int:
        return self.dimension - 1

    @property
    def populations(self) -> np.ndarray:
        return self.matrix.diagonal().real

    def check_invariants(self, hermitian_tol: float = 1e-10, trace_tol: float = 1e-10, psd_tol: float = 1e-8):
        """
        Check Hermiticity, unit trace and positivity.

        Raises:
            ConsistencyError: naming the first broken invariant
        """
        rho = self.matrix
        asymmetry = float(np.max(np.abs(rho - rho.conj().T)))
        if asymmetry > hermitian_tol:
            raise ConsistencyError("Density matrix is not Hermitian", deviation=asymmetry, time=self.time)
        trace = complex(np.trace(rho))
        if abs(trace - 1) > trace_tol:
            raise ConsistencyError("Density matrix trace drifted from 1", trace=trace.real, time=self.time)
        smallest = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
        if smallest < -psd_tol:
            raise ConsistencyError(
                "Density matrix has a negative eigenvalue; check the truncation",
                eigenvalue=smallest,
                time=self.time,
            )


def annihilation(n_max: int) -> np.ndarray:
    """Truncated annihilation operator, a|n> = sqrt(n)|n-1>"""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)


def fock_number_state(n: int, n_max: int) -> FockDensityMatrix:
    if not 0 <= n <= n_max:
        raise ValueError(f"Number state |{n}> is outside the truncation n_max={n_max}")
    ket = np.zeros(n_max + 1, dtype=complex)
    ket[n] = 1.0
    return FockDensityMatrix.from_ket(ket)


def _coherent_ket(alpha: complex, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    if alpha == 0:
        ket = (n == 0).astype(complex)
    else:
        log_mag = n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
        ket = np.exp(log_mag + 1j * n * np.angle(alpha))
    return ket


def fock_coherent_state(alpha: complex, n_max: int) -> FockDensityMatrix:
    """|alpha><alpha| truncated and renormalized"""
    ket = _coherent_ket(complex(alpha), n_max)
    return FockDensityMatrix.from_ket(ket / np.linalg.norm(ket))


def fock_superposition_state(state: CoherentSuperposition, n_max: int) -> FockDensityMatrix:
    """sum_k c_k |alpha_k> in the truncated basis, renormalized after truncation"""
    ket = sum(c * _coherent_ket(a, n_max) for c, a in zip(state.amplitudes, state.labels))
    norm = np.linalg.norm(ket)
    if norm == 0:
        raise ValueError("Superposition vanishes in the truncated basis")
    return FockDensityMatrix.from_ket(ket / norm)


def fock_cat_state(cat: CatState, n_max: int) -> FockDensityMatrix:
    return fock_superposition_state(cat.as_superposition(), n_max)


def purity(rho: FockDensityMatrix) -> float:
    return float(np.real(np.trace(rho.matrix @ rho.matrix)))


def photon_number(rho: FockDensityMatrix) -> float:
    return float(np.dot(np.arange(rho.dimension), rho.populations))


class _Liouvillian:
    """Right-hand side of the master equation for fixed coefficients"""

    def __init__(self, n_max: int):
        self.a = annihilation(n_max)
        self.ad = self.a.conj().T
        self.number = np.arange(n_max + 1, dtype=float)
        self.aad = (self.a @ self.ad).diagonal().real

    def __call__(self, rho: np.ndarray, omega_prime: float, gamma: float, gamma_tilde: float) -> np.ndarray:
        n_row = self.number[:, None]
        n_col = self.number[None, :]
        jump_down = self.a @ rho @ self.ad
        out = -1j * omega_prime * (n_row - n_col) * rho
        out += gamma * (2 * jump_down - (n_row + n_col) * rho)
        if gamma_tilde != 0:
            jump_up = self.ad @ rho @ self.a
            out += gamma_tilde * (jump_down + jump_up - n_row * rho - rho * self.aad[None, :])
        return out


def propagate_fock(
    rho0: FockDensityMatrix,
    coeffs: CoefficientTrajectory,
    grid: TimeGrid | None = None,
    snapshot_indices=None,
    substeps: int = 1,
) -> list[FockDensityMatrix]:
    """
    Integrate the master equation with classic RK4 on the coefficient grid.

    Coefficients are interpolated linearly between grid points. Snapshots are
    returned for ``snapshot_indices`` (every grid index by default), and the
    run stops at the largest of them.

    Raises:
        SingularWindowError: if any coefficient sample up to the last snapshot is flagged
        StepSizeError: if the trace drifts by more than the allowed tolerance
    """
    grid = coeffs.grid if grid is None else grid
    if grid != coeffs.grid:
        raise ValueError("Coefficients must be sampled on the propagation grid")
    if snapshot_indices is None:
        snapshot_indices = range(grid.n + 1)
    wanted = sorted({int(i) for i in snapshot_indices})
    if not wanted or wanted[0] < 0 or wanted[-1] > grid.n:
        raise ValueError(f"Snapshot indices must lie in [0, {grid.n}]")
    stop = wanted[-1]

    first = coeffs.first_singular_index(stop)
    if first is not None:
        raise SingularWindowError(
            f"Coefficients are singular at t={coeffs.times[first]:.12g} inside the propagation window",
            index=first,
            time=float(coeffs.times[first]),
        )

    rhs = _Liouvillian(rho0.n_max)
    rho = np.array(rho0.matrix)
    trace0 = np.trace(rho).real
    times = grid.times
    h = grid.dt / substeps
    drift_limit = app_settings.BOUNDSTATE_TRACE_DRIFT
    w, g, gt = coeffs.omega_prime, coeffs.gamma, coeffs.gamma_tilde

    def at(k, frac):
        return (
            (1 - frac) * w[k] + frac * w[k + 1],
            (1 - frac) * g[k] + frac * g[k + 1],
            (1 - frac) * gt[k] + frac * gt[k + 1],
        )

    logger.info("Propagating a %d-level density matrix over %d steps", rho0.dimension, stop)
    snapshots = []
    if wanted[0] == 0:
        snapshots.append(FockDensityMatrix(rho, float(times[0])))

    for k in range(stop):
        for sub in range(substeps):
            f0 = sub / substeps
            f1 = (sub + 0.5) / substeps
            f2 = (sub + 1) / substeps
            c0, c1, c2 = at(k, f0), at(k, f1), at(k, f2)
            k1 = rhs(rho, *c0)
            k2 = rhs(rho + 0.5 * h * k1, *c1)
            k3 = rhs(rho + 0.5 * h * k2, *c1)
            k4 = rhs(rho + h * k3, *c2)
            rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

        drift = abs(np.trace(rho).real - trace0)
        if drift > drift_limit:
            raise StepSizeError(
                f"Trace drifted by {drift:.3g} at t={times[k + 1]:.12g}; reduce the step size",
                index=k + 1,
                drift=float(drift),
            )
        if k + 1 in wanted:
            snapshots.append(FockDensityMatrix(rho, float(times[k + 1])))

    return snapshots


def _check_truncation(rho: FockDensityMatrix):
    tail = float(np.sum(rho.populations[max(0, rho.n_max - 4) :]))
    if tail > app_settings.BOUNDSTATE_TRUNCATION_POPULATION:
        raise TruncationError(
            f"Population {tail:.3g} in the top five Fock levels; increase n_max",
            n_max=rho.n_max,
            population=tail,
        )


def wigner_from_density(rho: FockDensityMatrix, points) -> np.ndarray:
    """
    W(z) = (2/pi) Tr[rho D(z) P D(z)^+] with P the photon-number parity.

    The displaced-parity elements come from associated Laguerre polynomials,
    for m >= n:
        <m|D P D^+|n> = (-1)^n sqrt(n!/m!) (2z)^(m-n) exp(-2|z|^2) L_n^(m-n)(4|z|^2)

    Raises:
        TruncationError: if the top Fock levels carry too much population
    """
    _check_truncation(rho)
    z = np.asarray(points, dtype=complex)
    shape = z.shape
    z = z.ravel()
    r2 = np.abs(z) ** 2
    gauss = np.exp(-2 * r2)
    matrix = rho.matrix

    total = np.zeros(z.shape, dtype=float)
    for m in range(rho.dimension):
        for n in range(m + 1):
            element = matrix[n, m]
            if element == 0:
                continue
            k = m - n
            scale = (-1) ** n * math.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
            parity = scale * (2 * z) ** k * gauss * eval_genlaguerre(n, k, 4 * r2)
            term = element * parity
            total += term.real if k == 0 else 2 * term.real
    return (2 / math.pi * total).reshape(shape)
