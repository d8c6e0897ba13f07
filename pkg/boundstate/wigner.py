"""Phase-space observables for superpositions of coherent states.

Coherent kets are unnormalized, |alpha> = exp(alpha a^+)|0>, so <alpha|beta> = exp(alpha* beta).
The state at time t depends on the initial one only through u(t) and the
width Omega(t) = 2 / (1 + 2 v(t)).
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from boundstate import app_settings
from boundstate.errors import FrameExtentError
from boundstate.greenfn import FluctuationTrajectory, GreenTrajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoherentSuperposition:
    """sum_k c_k |alpha_k> with unnormalized coherent kets"""

    amplitudes: tuple[complex, ...]
    labels: tuple[complex, ...]

    def __post_init__(self):
        amplitudes = tuple(complex(c) for c in self.amplitudes)
        labels = tuple(complex(a) for a in self.labels)
        if not amplitudes or len(amplitudes) != len(labels):
            raise ValueError("A superposition needs matching, non-empty amplitudes and labels")
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "labels", labels)
        if not self.norm_squared > 0:
            raise ValueError("Superposition has zero norm")

    @property
    def norm_squared(self) -> float:
        c = np.array(self.amplitudes)
        a = np.array(self.labels)
        overlaps = np.exp(np.conj(a)[:, None] * a[None, :])
        return float(np.real(np.conj(c) @ overlaps @ c))


@dataclass(frozen=True)
class CatState:
    """Even cat N (|alpha> + |-alpha>)"""

    alpha: complex

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))

    @property
    def N(self) -> float:  # pylint: disable=invalid-name
        return 1.0 / math.sqrt(4 * math.cosh(abs(self.alpha) ** 2))

    def as_superposition(self) -> CoherentSuperposition:
        return CoherentSuperposition((self.N, self.N), (self.alpha, -self.alpha))


@dataclass(frozen=True)
class WignerParams:
    """u(t) and the Gaussian width Omega(t) at one instant"""

    u_t: complex
    Omega_t: float  # pylint: disable=invalid-name

    def __post_init__(self):
        if not 0 < self.Omega_t <= 2 * (1 + app_settings.BOUNDSTATE_SOLVER_EPS):
            raise ValueError(f"Omega must lie in (0, 2], got {self.Omega_t}")
        object.__setattr__(self, "u_t", complex(self.u_t))

    @classmethod
    def from_uv(cls, u_t: complex, v_t: float) -> "WignerParams":
        """Clamps solver-noise negatives of v to zero"""
        if v_t < -app_settings.BOUNDSTATE_SOLVER_EPS:
            raise ValueError(f"v must be non-negative, got {v_t}")
        return cls(u_t, 2.0 / (1.0 + 2.0 * max(v_t, 0.0)))

    @classmethod
    def at(cls, u: GreenTrajectory, v: FluctuationTrajectory, t: float) -> "WignerParams":
        """Parameters at time ``t`` read off solved trajectories"""
        return cls.from_uv(u.at(t), v.at(t))

    @property
    def v_t(self) -> float:
        return 0.5 * (2.0 / self.Omega_t - 1.0)


def propagator_eval(params: WignerParams, z, alpha0: complex, alpha0p_conj: complex):
    """
    Propagating kernel: the Wigner function at time t of |alpha0><alpha0'|.

        (Omega/pi) exp[-Omega|z|^2 + Omega u z* alpha0 + Omega u* alpha0'* z
                       + alpha0'* alpha0 (1 - Omega |u|^2)]
    """
    om = params.Omega_t
    u = params.u_t
    z = np.asarray(z, dtype=complex)
    exponent = (
        -om * np.abs(z) ** 2
        + om * u * np.conj(z) * alpha0
        + om * np.conj(u) * alpha0p_conj * z
        + alpha0p_conj * alpha0 * (1 - om * abs(u) ** 2)
    )
    values = om / math.pi * np.exp(exponent)
    return values.item() if values.ndim == 0 else values


def superposition_wigner_eval(state: CoherentSuperposition, params: WignerParams, z):
    """Wigner function at time t of a normalized coherent superposition"""
    z = np.asarray(z, dtype=complex)
    total = np.zeros(z.shape, dtype=complex)
    for cj, aj in zip(state.amplitudes, state.labels):
        for ck, ak in zip(state.amplitudes, state.labels):
            total = total + cj * np.conj(ck) * propagator_eval(params, z, aj, np.conj(ak))
    values = np.real(total) / state.norm_squared
    return values.item() if values.ndim == 0 else values


def cat_components(cat: CatState, params: WignerParams, z):
    """
    The three parts of the cat Wigner function: the two classical peaks and the interference term.

    Returns:
        (W_alpha, W_minus_alpha, W_interference)
    """
    z = np.asarray(z, dtype=complex)
    om = params.Omega_t
    shifted = params.u_t * cat.alpha
    a2 = abs(cat.alpha) ** 2
    prefactor = cat.N**2 * om / math.pi
    w_plus = prefactor * math.exp(a2) * np.exp(-om * np.abs(z - shifted) ** 2)
    w_minus = prefactor * math.exp(a2) * np.exp(-om * np.abs(z + shifted) ** 2)
    w_cross = 2 * prefactor * math.exp(-a2) * np.real(np.exp(-om * np.conj(z - shifted) * (z + shifted)))
    return w_plus, w_minus, w_cross


def cat_wigner_eval(cat: CatState, params: WignerParams, z):
    """W = W_alpha + W_-alpha + W_I at time t"""
    w_plus, w_minus, w_cross = cat_components(cat, params, z)
    values = np.asarray(w_plus + w_minus + w_cross)
    return values.item() if values.ndim == 0 else values


def fringe_visibility(cat: CatState, u_t: complex, v_t: float) -> float:
    """F = exp[-2|alpha|^2 (1 - |u|^2 / (1 + 2v))]"""
    if v_t < -app_settings.BOUNDSTATE_SOLVER_EPS:
        raise ValueError(f"v must be non-negative, got {v_t}")
    v_t = max(v_t, 0.0)
    return math.exp(-2 * abs(cat.alpha) ** 2 * (1 - abs(u_t) ** 2 / (1 + 2 * v_t)))


def fringe_visibility_series(cat: CatState, u: GreenTrajectory, v: FluctuationTrajectory) -> np.ndarray:
    v_samples = np.clip(v.samples, 0.0, None)
    return np.exp(-2 * abs(cat.alpha) ** 2 * (1 - u.magnitude**2 / (1 + 2 * v_samples)))


def thermal_wigner(nbar: float, z):
    """Thermal state Wigner function (2/pi) exp(-2|z|^2/(1+2 nbar)) / (1+2 nbar)"""
    if nbar < 0:
        raise ValueError(f"Occupation must be non-negative, got {nbar}")
    width = 1 + 2 * nbar
    values = 2 / (math.pi * width) * np.exp(-2 * np.abs(np.asarray(z)) ** 2 / width)
    return values.item() if values.ndim == 0 else values


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid of z = x + i y"""

    x_min: float
    x_max: float
    nx: int
    y_min: float
    y_max: float
    ny: int

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2 or not self.x_max > self.x_min or not self.y_max > self.y_min:
            raise ValueError("Grid needs at least two points per axis and positive extents")

    @classmethod
    def default_for(cls, cat: CatState, params: WignerParams, points: int | None = None) -> "GridSpec":
        """Square grid reaching |u alpha| + 4 widths in every direction"""
        points = points or app_settings.BOUNDSTATE_FRAME_POINTS
        half = abs(params.u_t * cat.alpha) + 4 / math.sqrt(params.Omega_t)
        return cls(-half, half, points, -half, half, points)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def points(self) -> np.ndarray:
        """z on the grid, shape (ny, nx)"""
        return self.xs[None, :] + 1j * self.ys[:, None]

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        return (
            self.x_min + margin <= z.real <= self.x_max - margin
            and self.y_min + margin <= z.imag <= self.y_max - margin
        )

    def as_tuple(self) -> tuple:
        return (self.x_min, self.x_max, self.nx, self.y_min, self.y_max, self.ny)


@dataclass(frozen=True)
class WignerFrame:
    """W(z, t) sampled on a grid; rows run over y, columns over x"""

    time: float
    grid: GridSpec
    values: np.ndarray
    components: tuple[np.ndarray, np.ndarray, np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.ny, self.grid.nx):
            raise ValueError(f"Frame values must have shape {(self.grid.ny, self.grid.nx)}, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def normalization(self) -> float:
        """Riemann sum of W dx dy"""
        return float(self.values.sum() * self.grid.dx * self.grid.dy)

    def _grid_max(self, values: np.ndarray) -> tuple[complex, float]:
        row, col = np.unravel_index(int(np.argmax(values)), values.shape)
        return complex(self.grid.xs[col], self.grid.ys[row]), float(values[row, col])

    def peak_locations(self) -> tuple[complex, complex]:
        """Grid points of the two classical peaks"""
        if self.components is None:
            raise ValueError("Frame carries no component split")
        return self._grid_max(self.components[0])[0], self._grid_max(self.components[1])[0]


def render_frame(cat: CatState, params: WignerParams, grid: GridSpec | None = None, time: float = 0.0) -> WignerFrame:
    """
    Sample the cat Wigner function on a grid.

    Raises:
        FrameExtentError: if the peaks at +-u alpha plus four widths fall outside the grid
    """
    grid = grid or GridSpec.default_for(cat, params)
    peak = params.u_t * cat.alpha
    margin = 4 / math.sqrt(params.Omega_t)
    for candidate in (peak, -peak):
        if not grid.contains(candidate, margin=margin * (1 - 1e-9)):
            raise FrameExtentError(
                f"Peak at {candidate:.6g} with margin {margin:.6g} lies outside the frame",
                peak=[candidate.real, candidate.imag],
                margin=margin,
                grid=list(grid.as_tuple()),
            )

    z = grid.points
    components = cat_components(cat, params, z)
    values = components[0] + components[1] + components[2]
    frame = WignerFrame(time, grid, values, components)
    logger.debug("Rendered frame at t=%g, normalization %.9f", time, frame.normalization)
    return frame


def peak_visibility(frame: WignerFrame) -> float:
    """Ratio of the interference peak to twice the geometric mean of the classical peaks"""
    if frame.components is None:
        raise ValueError("Frame carries no component split")
    w_plus, w_minus, w_cross = frame.components
    return float(np.max(w_cross) / (2 * math.sqrt(np.max(w_plus) * np.max(w_minus))))
