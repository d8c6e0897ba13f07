"""Laplace-domain structure of the Green function.

u~(s) = i / (i s - omega_c - Sigma(s)). Bound states are real roots of
Omega - omega_c = Delta(Omega) outside the support of J; the rest of u(t) is the
branch-cut continuum, integrated here on the real frequency axis.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from boundstate import app_settings
from boundstate.errors import (
    BranchCutError,
    ConsistencyError,
    EnvelopeDomainError,
    MarkovLimitError,
    QuadratureError,
)
from boundstate.greenfn import GreenTrajectory, TimeGrid
from boundstate.quadrature import converge_panels, integrate
from boundstate.spectral import (
    ModelKind,
    SpectralModel,
    eval_J,
    fourier_on_nodes,
    initial_panels,
    spectral_nodes,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundPole:
    """A real pole of u~ at s = -i Omega with residue Z"""

    omega: float
    residue: float
    marginal: bool = False


@dataclass(frozen=True)
class PoleReport:
    """Bound states, band and continuum weight of a cavity-reservoir pair"""

    bound_poles: tuple[BoundPole, ...]
    band: tuple[float, float]
    critical_coupling: float | None
    continuum_weight: float
    marginal_poles: tuple[BoundPole, ...] = field(default=())
    critical_marginal: bool = False

    @property
    def residue_sum(self) -> float:
        return float(sum(p.residue for p in self.bound_poles))

    @property
    def sum_rule_residual(self) -> float:
        """1 - sum Z_j - continuum weight; zero for an exact decomposition"""
        return 1.0 - self.residue_sum - self.continuum_weight

    def as_dict(self) -> dict:
        lo, hi = self.band
        return {
            "bound_poles": [{"Omega": p.omega, "Z": p.residue} for p in self.bound_poles],
            "marginal_poles": [{"Omega": p.omega, "Z": p.residue} for p in self.marginal_poles],
            "band": {"omega_e": lo, "omega_max": None if math.isinf(hi) else hi},
            "critical_coupling": self.critical_coupling,
            "critical_marginal": self.critical_marginal,
            "continuum_weight": self.continuum_weight,
            "residue_sum": self.residue_sum,
            "sum_rule_residual": self.sum_rule_residual,
        }


def _on_cut(model: SpectralModel, s: complex) -> bool:
    lo, hi = model.support
    return s.real == 0 and lo <= -s.imag <= hi and not model.is_null


def sigma(model: SpectralModel, s: complex, method: str = "auto") -> complex:
    """
    Self-energy Sigma(s) = int domega/2pi J(omega) / (i s - omega).

    The waveguide uses the closed form on the principal sheet, written so that it
    is free of cancellation at large |s|; other models (or ``method="quadrature"``)
    integrate numerically.

    Raises:
        BranchCutError: if ``s`` lies on the cut; use ``delta`` and ``eval_J`` there
    """
    s = complex(s)
    if model.is_null:
        return 0.0j
    if _on_cut(model, s):
        raise BranchCutError(
            "Sigma is discontinuous on the branch cut; use delta(omega) -/+ i J(omega)/2 as the limits",
            s=str(s),
        )

    if model.kind is ModelKind.WAVEGUIDE and method != "quadrature":
        w = s + 1j * model.omega0
        # sqrt(w^2 + 4 xi0^2) = w sqrt(1 + 4 xi0^2 / w^2) puts the cut on the band only
        root = w * np.sqrt(1 + (2 * model.xi0 / w) ** 2)
        return complex(0.5j * model.eta**2 * (-4 * model.xi0**2) / (w + root))

    def part(omega, pick):
        return pick(eval_J(model, omega) / (2 * math.pi) / (1j * s - omega))

    lo, hi = model.support
    if model.kind is ModelKind.WAVEGUIDE:

        def along_band(phi, pick):
            omega = model.omega0 + 2 * model.xi0 * math.cos(phi)
            return part(omega, pick) * 2 * model.xi0 * math.sin(phi)

        re = integrate(along_band, 0.0, math.pi, what="sigma", args=(np.real,))
        im = integrate(along_band, 0.0, math.pi, what="sigma", args=(np.imag,))
    else:
        re = integrate(part, lo, hi, what="sigma", args=(np.real,))
        im = integrate(part, lo, hi, what="sigma", args=(np.imag,))
    return complex(re, im)


def _delta_waveguide(model: SpectralModel, omega: float) -> float:
    y = omega - model.omega0
    edge = 2 * model.xi0
    if abs(y) <= edge:
        return 0.5 * model.eta**2 * y
    return 0.5 * model.eta**2 * (y - math.copysign(math.sqrt(y * y - edge * edge), y))


def _delta_prime_waveguide(model: SpectralModel, omega: float) -> float:
    y = omega - model.omega0
    edge = 2 * model.xi0
    if abs(y) < edge:
        return 0.5 * model.eta**2
    if abs(y) == edge:
        return -math.inf
    return 0.5 * model.eta**2 * (1 - abs(y) / math.sqrt(y * y - edge * edge))


def _delta_quadrature(model: SpectralModel, omega: float) -> float:
    lo, hi = model.support

    def density(w):
        return eval_J(model, w) / (2 * math.pi)

    if math.isinf(hi):
        if lo < omega:
            # QAWC computes P int f(w)/(w - omega); Delta carries 1/(omega - w)
            head = integrate(density, lo, 2 * omega, what="delta", weight="cauchy", wvar=omega)
            tail = integrate(lambda w: density(w) / (w - omega), 2 * omega, math.inf, what="delta")
            return -(head + tail)
        return integrate(lambda w: density(w) / (omega - w), lo, math.inf, what="delta")

    # Subtract the singular part: P int dw/(omega - w) over [lo, hi] = log((omega - lo)/(hi - omega))
    inside = lo < omega < hi
    pinned = density(omega) if inside else 0.0

    def regular(w):
        if w == omega:
            return 0.0
        return (density(w) - pinned) / (omega - w)

    if model.kind is ModelKind.WAVEGUIDE:

        def along_band(phi):
            w = model.omega0 + 2 * model.xi0 * math.cos(phi)
            return regular(w) * 2 * model.xi0 * math.sin(phi)

        value = integrate(along_band, 0.0, math.pi, what="delta")
    else:
        breaks = sorted({s[0] for s in model.samples[1:-1]} | ({omega} if inside else set()))
        kwargs = {"points": breaks} if breaks else {}
        value = integrate(regular, lo, hi, what="delta", **kwargs)

    if inside:
        value += pinned * math.log((omega - lo) / (hi - omega))
    return value


def _delta_tabulated(model: SpectralModel, omega, derivative: bool = False) -> np.ndarray:
    """
    Closed-form Lamb shift (or its derivative) of a piecewise-linear J.

    With slope changes D_k at the nodes w_k and x_k = omega - w_k,
    2 pi Delta = sum_k D_k x_k log|x_k| + J_0 log|x_0| - J_N log|x_N| - (J_N - J_0).
    A nonzero J at an edge sends Delta to -inf at the lower and +inf at the upper edge.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    xs = np.array([s[0] for s in model.samples])
    js = np.array([s[1] for s in model.samples])
    slopes = np.diff(js) / np.diff(xs)
    kinks = np.diff(slopes, prepend=0.0, append=0.0)

    total = np.zeros_like(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        for node, kink in zip(xs, kinks):
            if kink == 0:
                continue
            x = w - node
            log_x = np.log(np.abs(x))
            if derivative:
                total += kink * log_x
            else:
                total += np.where(x != 0, kink * x * log_x, 0.0)
        for node, value, sign in ((xs[0], js[0], 1.0), (xs[-1], js[-1], -1.0)):
            if value == 0:
                continue
            x = w - node
            total += sign * value * (1.0 / x if derivative else np.log(np.abs(x)))
    if not derivative:
        total -= js[-1] - js[0]
    return total / (2 * math.pi)


def _delta_values(model: SpectralModel, omega: np.ndarray) -> np.ndarray:
    if model.is_null:
        return np.zeros_like(omega)
    if model.kind is ModelKind.TABULATED:
        return _delta_tabulated(model, omega)
    if model.kind is ModelKind.WAVEGUIDE:
        y = omega - model.omega0
        edge = 2 * model.xi0
        outside = np.sign(y) * np.sqrt(np.clip(y * y - edge * edge, 0.0, None))
        return 0.5 * model.eta**2 * np.where(np.abs(y) <= edge, y, y - outside)
    return np.array([_delta_quadrature(model, w) for w in omega])


def delta(model: SpectralModel, omega: float, method: str = "auto") -> float:
    """
    Lamb shift Delta(omega) = P int domega'/2pi J(omega') / (omega - omega').

    Closed form for the waveguide and for tabulated models; principal-value
    quadrature for the Ohmic family (or with ``method="quadrature"``).
    """
    omega = float(omega)
    if model.is_null:
        return 0.0
    if method != "quadrature":
        if model.kind is ModelKind.WAVEGUIDE:
            return _delta_waveguide(model, omega)
        if model.kind is ModelKind.TABULATED:
            return float(_delta_tabulated(model, omega)[0])
    return _delta_quadrature(model, omega)


def delta_prime(model: SpectralModel, omega: float, step: float | None = None) -> float:
    """dDelta/domega, analytic for the waveguide and tabulated models, central difference otherwise"""
    if model.is_null:
        return 0.0
    if model.kind is ModelKind.WAVEGUIDE:
        return _delta_prime_waveguide(model, omega)
    if model.kind is ModelKind.TABULATED:
        return float(_delta_tabulated(model, omega, derivative=True)[0])
    h = 1e-6 * model.unit if step is None else step
    return (delta(model, omega + h) - delta(model, omega - h)) / (2 * h)


def residue_at(model: SpectralModel, omega_c: float, Omega: float) -> float:  # pylint: disable=invalid-name
    """
    Residue Z = 1 / (1 - Delta'(Omega)) of a bound pole.

    Raises:
        ConsistencyError: if Z falls outside (0, 1)
    """
    lo, hi = model.support
    edge_distance = min(abs(Omega - lo), abs(Omega - hi))
    step = min(1e-6 * model.unit, 0.5 * edge_distance)
    z = 1.0 / (1.0 - delta_prime(model, Omega, step=step))
    if not 0 < z < 1:
        raise ConsistencyError(
            f"Residue {z:.6g} at Omega={Omega:.12g} is outside (0, 1)",
            omega=Omega,
            omega_c=omega_c,
            residue=z,
        )
    return z


def cavity_on_band_edge(omega_c: float, omega0: float, xi0: float) -> bool:
    """True when omega_c sits within the marginal distance of a waveguide band edge"""
    return abs(abs(omega_c - omega0) - 2 * xi0) < app_settings.BOUNDSTATE_MARGINAL_DISTANCE * xi0


def critical_coupling(omega_c: float, omega0: float, xi0: float) -> float:
    """
    Coupling eta_c = sqrt(2 - |omega_c - omega0|/xi0) above which the waveguide binds.

    Zero off band and on a band edge, where the pole that emerges at vanishing
    coupling is marginal.
    """
    if cavity_on_band_edge(omega_c, omega0, xi0):
        return 0.0
    detuning = abs(omega_c - omega0) / xi0
    if detuning >= 2:
        return 0.0
    return math.sqrt(2 - detuning)


def _pole_equation(model: SpectralModel, omega_c: float):
    return lambda w: w - omega_c - delta(model, w)


def _bracket_outward(f, edge: float, direction: float, scale: float) -> float:
    """Point beyond ``edge`` in ``direction`` where f has the sign of ``direction``"""
    step = scale
    for _ in range(200):
        x = edge + direction * step
        if direction * f(x) > 0:
            return x
        step *= 2
    raise ConsistencyError("Could not bracket a bound pole", edge=edge, direction=direction)


def find_bound_poles(model: SpectralModel, omega_c: float) -> PoleReport:
    """
    All bound poles, their residues and the continuum weight.

    Omega - omega_c - Delta(Omega) increases monotonically on each side of the
    support, so each side holds at most one root; it is bracketed from the sign at
    the edge and refined by bisection. Roots within the marginal distance of an
    edge are reported separately with zero residue and left out of the sum rule.
    """
    unit = model.unit
    lo, hi = model.support
    critical, on_edge = None, False
    if model.kind is ModelKind.WAVEGUIDE:
        critical = critical_coupling(omega_c, model.omega0, model.xi0)
        on_edge = cavity_on_band_edge(omega_c, model.omega0, model.xi0)
        if on_edge:
            logger.warning("omega_c=%.12g sits on a band edge: the critical coupling is marginal", omega_c)

    if model.is_null:
        logger.info("Null reservoir: free pole at omega_c=%g", omega_c)
        return PoleReport((BoundPole(float(omega_c), 1.0),), (lo, hi), critical, 0.0, critical_marginal=on_edge)

    f = _pole_equation(model, omega_c)
    xtol = app_settings.BOUNDSTATE_BISECTION_XTOL * unit
    marginal_distance = app_settings.BOUNDSTATE_MARGINAL_DISTANCE * unit
    gap = max(1e-3 * xtol, 4 * float(np.spacing(max(abs(lo), abs(hi) if math.isfinite(hi) else 0.0))))
    scale = max(unit, abs(omega_c - lo), abs(omega_c - hi) if math.isfinite(hi) else 0.0)

    roots = []
    if f(lo - gap) > 0:
        outer = _bracket_outward(f, lo, -1.0, scale)
        logger.debug("Lower pole bracketed in [%.12g, %.12g]", outer, lo - gap)
        roots.append((bisect(f, outer, lo - gap, xtol=xtol), lo))
    if math.isfinite(hi) and f(hi + gap) < 0:
        outer = _bracket_outward(f, hi, 1.0, scale)
        logger.debug("Upper pole bracketed in [%.12g, %.12g]", hi + gap, outer)
        roots.append((bisect(f, hi + gap, outer, xtol=xtol), hi))

    poles, marginal = [], []
    for root, edge in roots:
        if abs(root - edge) < marginal_distance:
            logger.warning("Marginal bound pole at %.12g, %.3g from the band edge", root, abs(root - edge))
            marginal.append(BoundPole(float(root), 0.0, marginal=True))
        else:
            poles.append(BoundPole(float(root), residue_at(model, omega_c, root)))

    weight = continuum_weight(model, omega_c)
    report = PoleReport(tuple(poles), (lo, hi), critical, weight, tuple(marginal), on_edge)
    logger.info(
        "Found %d bound poles (%d marginal), residue sum %.12g, continuum weight %.12g",
        len(poles),
        len(marginal),
        report.residue_sum,
        weight,
    )
    if abs(report.sum_rule_residual) > app_settings.BOUNDSTATE_SUM_RULE_TOLERANCE and not marginal:
        logger.warning("Sum rule violated by %.3g", report.sum_rule_residual)
    return report


def spectral_function(model: SpectralModel, omega_c: float, omega) -> np.ndarray:
    """Continuum spectral density J / (2 pi [(omega - omega_c - Delta)^2 + (J/2)^2])"""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    j = eval_J(model, omega)
    shift = _delta_values(model, omega)
    denominator = (omega - omega_c - shift) ** 2 + (0.5 * j) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(j > 0, j / (2 * math.pi * denominator), 0.0)
    return values


def pole_condition_curve(model: SpectralModel, omega_c: float, points: int = 801):
    """
    omega - omega_c - Delta(omega) and J(omega) on a window around the support.

    The bound poles are the zero crossings outside the support. The window
    reaches four frequency units past each edge (an Ohmic support is cut eight
    units above its branch point) and always contains omega_c.

    Returns:
        (omega, condition, J) arrays of length ``points``
    """
    if points < 2:
        raise ValueError(f"A pole-condition curve needs at least two points, got {points}")
    unit = model.unit
    lo, hi = model.support
    if math.isinf(hi):
        hi = lo + 8 * unit
    start = min(lo - 4 * unit, omega_c - unit)
    stop = max(hi + 4 * unit, omega_c + unit)
    omega = np.linspace(start, stop, points)
    condition = omega - omega_c - _delta_values(model, omega)
    return omega, condition, eval_J(model, omega)


def _continuum_on(model: SpectralModel, omega_c: float, panels: int):
    omega, w = spectral_nodes(model, panels)
    return omega, w * spectral_function(model, omega_c, omega)


def _continuum_panels(model: SpectralModel, omega_c: float, t_max: float) -> int:
    sample_times = np.linspace(0.0, t_max, 9)

    def sample(panels):
        omega, weights = _continuum_on(model, omega_c, panels)
        return fourier_on_nodes(omega, weights, sample_times)

    try:
        return converge_panels(sample, initial_panels(model, t_max), 1.0, what="continuum")
    except QuadratureError as e:
        omega, weights = _continuum_on(model, omega_c, initial_panels(model, t_max))
        worst = float(omega[int(np.argmax(np.abs(weights)))])
        raise QuadratureError(str(e), worst_omega=worst, **e.details) from e


def continuum_weight(model: SpectralModel, omega_c: float) -> float:
    """Integral of the continuum spectral function over the support"""
    if model.is_null:
        return 0.0
    panels = _continuum_panels(model, omega_c, 0.0)
    _, weights = _continuum_on(model, omega_c, panels)
    return float(np.sum(weights))


def reconstruct_u(model: SpectralModel, omega_c: float, grid: TimeGrid) -> GreenTrajectory:
    """
    u(t) = sum_j Z_j exp(-i Omega_j t) + int domega A(omega) exp(-i omega t).

    A is the continuum spectral function; deforming the inversion contour onto
    the cut folds the Hankel-path and off-axis pole contributions into this one
    real-frequency integral. Marginal poles are left out.

    Raises:
        QuadratureError: if the Gauss panels do not converge, with the worst omega
    """
    report = find_bound_poles(model, omega_c)
    times = grid.times
    u = np.zeros(times.shape, dtype=complex)
    for pole in report.bound_poles:
        u += pole.residue * np.exp(-1j * pole.omega * times)

    if not model.is_null:
        panels = _continuum_panels(model, omega_c, float(np.max(np.abs(times))))
        omega, weights = _continuum_on(model, omega_c, panels)
        u += fourier_on_nodes(omega, weights, times)
        logger.debug("Continuum integrated on %d nodes", len(omega))

    return GreenTrajectory(grid, u)


def markov_limit(model: SpectralModel, omega_c: float) -> tuple[float, float]:
    """
    Born-Markov frequency and decay rate (omega_c + Delta(omega_c), J(omega_c)/2).

    Raises:
        MarkovLimitError: if omega_c lies outside the support of J
    """
    lo, hi = model.support
    if not lo <= omega_c <= hi:
        raise MarkovLimitError(
            f"omega_c={omega_c} is outside the support [{lo}, {hi}]: no Markovian decay channel",
            omega_c=omega_c,
            band=[lo, None if math.isinf(hi) else hi],
        )
    return omega_c + delta(model, omega_c), 0.5 * eval_J(model, omega_c)


def steady_envelope(eta: float, xi0: float = 1.0) -> tuple[float, float]:
    """
    Amplitude A = (eta^2 - 2)/(eta^2 - 1) and frequency eta^2 xi0 / sqrt(eta^2 - 1)
    of the late-time cosine envelope at resonance.

    Raises:
        EnvelopeDomainError: for eta <= sqrt(2)
    """
    if not eta > math.sqrt(2):
        raise EnvelopeDomainError(
            f"No bound states at resonance for eta={eta} <= sqrt(2)",
            eta=eta,
        )
    e2 = eta * eta
    return (e2 - 2) / (e2 - 1), e2 * xi0 / math.sqrt(e2 - 1)
