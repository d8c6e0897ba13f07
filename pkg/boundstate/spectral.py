"""Spectral densities, thermal occupation and bath correlation kernels.

Units: hbar = k_B = 1, frequencies and times are dimensionless.
"""

import enum
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import j1

from boundstate import app_settings
from boundstate.cache import KernelCache
from boundstate.errors import SpectralDomainError
from boundstate.quadrature import converge_panels, gauss_legendre_panels, integrate

logger = logging.getLogger(__name__)

# The Ohmic family support is cut where e^{-omega/omega_cut} drops below e^-60
OHMIC_TAIL = 60.0

# Upper bound on the number of complex exponentials held in memory at once
_CHUNK_ELEMENTS = 2_000_000

# Geometric panel refinement toward a support edge where a tabulated J is nonzero
EDGE_GRADING_RATIO = 0.1
EDGE_GRADING_LEVELS = 14


class ModelKind(enum.Enum):
    """All supported reservoir families"""

    WAVEGUIDE = "waveguide"
    OHMIC_FAMILY = "ohmic"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class SpectralModel:
    """A reservoir described by its spectral density J(omega)"""

    kind: ModelKind
    eta: float = 0.0
    omega0: float = 0.0
    xi0: float = 1.0
    kappa: float = 0.0
    omega_cut: float = 1.0
    exponent: float = 1.0
    samples: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind is ModelKind.WAVEGUIDE:
            if not self.xi0 > 0:
                raise SpectralDomainError("Waveguide hopping xi0 must be positive", xi0=self.xi0)
            if not math.isfinite(self.eta) or not math.isfinite(self.omega0):
                raise SpectralDomainError("Waveguide parameters must be finite")
        elif self.kind is ModelKind.OHMIC_FAMILY:
            if self.kappa < 0 or not self.omega_cut > 0 or not self.exponent > 0:
                raise SpectralDomainError(
                    "Ohmic family needs kappa >= 0, omega_cut > 0 and exponent > 0",
                    kappa=self.kappa,
                    omega_cut=self.omega_cut,
                    exponent=self.exponent,
                )
        else:
            if len(self.samples) < 2:
                raise SpectralDomainError("A tabulated model needs at least two samples")
            omegas = np.array([s[0] for s in self.samples], dtype=float)
            values = np.array([s[1] for s in self.samples], dtype=float)
            if np.any(np.diff(omegas) <= 0):
                raise SpectralDomainError("Tabulated frequencies must be strictly increasing")
            if omegas[0] < 0 or np.any(values < 0):
                raise SpectralDomainError("Tabulated samples need omega >= 0 and J >= 0")

    @classmethod
    def waveguide(cls, eta: float, omega0: float, xi0: float = 1.0) -> "SpectralModel":
        """Coupled-cavity waveguide band of width 4*xi0 centred at omega0"""
        return cls(ModelKind.WAVEGUIDE, eta=float(eta), omega0=float(omega0), xi0=float(xi0))

    @classmethod
    def ohmic(cls, kappa: float, omega_cut: float, exponent: float = 1.0) -> "SpectralModel":
        """Ohmic (p=1), super-Ohmic (p>1) or sub-Ohmic (p<1) reservoir"""
        return cls(
            ModelKind.OHMIC_FAMILY,
            kappa=float(kappa),
            omega_cut=float(omega_cut),
            exponent=float(exponent),
        )

    @classmethod
    def tabulated(cls, samples) -> "SpectralModel":
        """Piecewise-linear J from (omega, J) pairs"""
        return cls(ModelKind.TABULATED, samples=tuple((float(w), float(j)) for w, j in samples))

    @classmethod
    def from_table_file(cls, path) -> "SpectralModel":
        """Load a two-column (omega, J) text file, comma or whitespace delimited"""
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise SpectralDomainError(f"Cannot open spectral table {path}: {e}", path=str(path)) from e
        delimiter = "," if "," in text else None
        try:
            data = np.loadtxt(path, delimiter=delimiter, comments="#", ndmin=2)
        except ValueError as e:
            raise SpectralDomainError(f"Cannot read spectral table {path}: {e}", path=str(path)) from e
        if data.shape[1] != 2:
            raise SpectralDomainError(
                f"Spectral table {path} must have two columns, found {data.shape[1]}",
                path=str(path),
            )
        return cls.tabulated(map(tuple, data))

    @property
    def support(self) -> tuple[float, float]:
        """Declared support of J; the lower edge is the branch point omega_e"""
        if self.kind is ModelKind.WAVEGUIDE:
            return self.omega0 - 2 * self.xi0, self.omega0 + 2 * self.xi0
        if self.kind is ModelKind.OHMIC_FAMILY:
            return 0.0, math.inf
        return self.samples[0][0], self.samples[-1][0]

    @property
    def integration_support(self) -> tuple[float, float]:
        """Finite interval carrying all the spectral weight"""
        lo, hi = self.support
        if math.isinf(hi):
            hi = OHMIC_TAIL * self.omega_cut
        return lo, hi

    @property
    def reference_frequency(self) -> float:
        """Frequency of the rotating frame used by the time-domain solver"""
        if self.kind is ModelKind.WAVEGUIDE:
            return self.omega0
        if self.kind is ModelKind.OHMIC_FAMILY:
            return 0.0
        lo, hi = self.support
        return 0.5 * (lo + hi)

    @property
    def unit(self) -> float:
        """Natural frequency unit: xi0 for the waveguide, the cutoff or band width otherwise"""
        if self.kind is ModelKind.WAVEGUIDE:
            return self.xi0
        if self.kind is ModelKind.OHMIC_FAMILY:
            return self.omega_cut
        lo, hi = self.support
        return 0.25 * (hi - lo)

    @property
    def is_null(self) -> bool:
        """True when J vanishes identically"""
        if self.kind is ModelKind.WAVEGUIDE:
            return self.eta == 0
        if self.kind is ModelKind.OHMIC_FAMILY:
            return self.kappa == 0
        return all(j == 0 for _, j in self.samples)

    @property
    def cache_key(self) -> str:
        if self.kind is ModelKind.WAVEGUIDE:
            return f"waveguide({self.eta!r},{self.omega0!r},{self.xi0!r})"
        if self.kind is ModelKind.OHMIC_FAMILY:
            return f"ohmic({self.kappa!r},{self.omega_cut!r},{self.exponent!r})"
        return f"tabulated({hash(self.samples):x},{len(self.samples)})"


@dataclass(frozen=True)
class BathSpec:
    """Reservoir temperature, theta = k_B T / hbar in the units of J"""

    theta: float = 0.0

    def __post_init__(self):
        if not self.theta >= 0 or math.isinf(self.theta):
            raise SpectralDomainError("Bath temperature theta must be finite and >= 0", theta=self.theta)

    @classmethod
    def from_nbar(cls, nbar: float, omega: float) -> "BathSpec":
        """Temperature at which the occupation at ``omega`` equals ``nbar``"""
        if nbar < 0:
            raise SpectralDomainError("Occupation must be non-negative", nbar=nbar)
        if nbar == 0:
            return cls(0.0)
        if not omega > 0:
            raise SpectralDomainError("Occupation can only be fixed at a positive frequency", omega=omega)
        return cls(omega / math.log1p(1.0 / nbar))

    @property
    def cache_key(self) -> str:
        return f"theta({self.theta!r})"


def _returned(values: np.ndarray, scalar: bool):
    return values.item() if scalar else values


def eval_J(model: SpectralModel, omega):  # pylint: disable=invalid-name
    """
    Spectral density J(omega), vectorised over ``omega``.

    Zero outside the declared support of the model.
    """
    scalar = np.ndim(omega) == 0
    w = np.asarray(omega, dtype=float)

    if model.kind is ModelKind.WAVEGUIDE:
        y = w - model.omega0
        radicand = 4 * model.xi0**2 - y**2
        values = np.where(radicand >= 0, model.eta**2 * np.sqrt(np.clip(radicand, 0, None)), 0.0)
    elif model.kind is ModelKind.OHMIC_FAMILY:
        positive = np.clip(w, 0, None)
        x = positive / model.omega_cut
        with np.errstate(divide="ignore", invalid="ignore"):
            values = 2 * np.pi * model.kappa * positive * np.power(x, model.exponent - 1) * np.exp(-x)
        values = np.where(w > 0, values, 0.0)
    else:
        xs = np.array([s[0] for s in model.samples])
        js = np.array([s[1] for s in model.samples])
        values = np.interp(w, xs, js, left=0.0, right=0.0)

    return _returned(np.asarray(values, dtype=float), scalar)


def eval_nbar(bath: BathSpec, omega):
    """
    Bose-Einstein occupation 1/(exp(omega/theta) - 1), vectorised over ``omega``.

    Raises:
        SpectralDomainError: for omega <= 0 at finite temperature
    """
    scalar = np.ndim(omega) == 0
    w = np.asarray(omega, dtype=float)
    if bath.theta == 0:
        return _returned(np.zeros_like(w), scalar)
    if np.any(w <= 0):
        raise SpectralDomainError(
            "Thermal occupation diverges for omega <= 0",
            omega=float(np.min(w)),
            theta=bath.theta,
        )
    return _returned(1.0 / np.expm1(w / bath.theta), scalar)


def spectral_nodes(model: SpectralModel, panels: int, order: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Quadrature nodes and weights for integrals over the support of J.

    The waveguide band uses omega = omega0 + 2 xi0 cos(phi), which removes the
    square-root edges; the Ohmic family uses omega = omega_max s^2. Tabulated
    models put ``panels`` Gauss panels on every tabulation interval, plus a
    geometric ladder toward a support edge where J is nonzero.

    Returns:
        (omega, weight) with sum(weight * f(omega)) ~ integral of f over the support
    """
    order = order or app_settings.BOUNDSTATE_GAUSS_ORDER

    if model.kind is ModelKind.WAVEGUIDE:
        phi, w = gauss_legendre_panels(0.0, np.pi, panels, order)
        omega = model.omega0 + 2 * model.xi0 * np.cos(phi)
        return omega, w * 2 * model.xi0 * np.sin(phi)

    if model.kind is ModelKind.OHMIC_FAMILY:
        _, hi = model.integration_support
        s, w = gauss_legendre_panels(0.0, 1.0, panels, order)
        return hi * s**2, w * 2 * hi * s

    xs = np.array([s[0] for s in model.samples])
    js = np.array([s[1] for s in model.samples])
    last = len(xs) - 2
    parts = []
    for k, (a, b) in enumerate(zip(xs[:-1], xs[1:])):
        parts.extend(_graded_panels(a, b, panels, order, k == 0 and js[0] > 0, k == last and js[-1] > 0))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _graded_panels(a: float, b: float, panels: int, order: int, at_a: bool, at_b: bool) -> list:
    """
    Gauss panels on [a, b], refined geometrically toward a flagged end.

    Where J jumps to zero at the support edge the Lamb shift diverges like
    log|omega - edge|, which equal panels cannot resolve.
    """
    half = 0.5 * (b - a)
    inner_a = a + half * EDGE_GRADING_RATIO if at_a else a
    inner_b = b - half * EDGE_GRADING_RATIO if at_b else b
    parts = [gauss_legendre_panels(inner_a, inner_b, panels, order)]
    levels = half * EDGE_GRADING_RATIO ** np.arange(1, EDGE_GRADING_LEVELS + 1)
    cuts = np.append(levels, 0.0)
    for outer, inner in zip(cuts[:-1], cuts[1:]):
        if at_a:
            parts.append(gauss_legendre_panels(a + inner, a + outer, 1, order))
        if at_b:
            parts.append(gauss_legendre_panels(b - outer, b - inner, 1, order))
    return parts


def initial_panels(model: SpectralModel, tau_max: float, order: int | None = None) -> int:
    """Panel count resolving exp(-i omega tau) up to ``tau_max`` at about one radian per node"""
    order = order or app_settings.BOUNDSTATE_GAUSS_ORDER
    lo, hi = model.integration_support
    phase = (hi - lo) * abs(tau_max) * np.pi / 2
    if model.kind is ModelKind.TABULATED:
        phase /= max(len(model.samples) - 1, 1)
    return max(2, int(math.ceil(phase / order)))


def fourier_on_nodes(omega: np.ndarray, weights: np.ndarray, times: np.ndarray) -> np.ndarray:
    """sum_k weights_k exp(-i omega_k t) for every t, chunked to bound memory"""
    times = np.asarray(times, dtype=float)
    out = np.empty(times.shape, dtype=complex)
    chunk = max(1, _CHUNK_ELEMENTS // max(len(omega), 1))
    for start in range(0, len(times), chunk):
        block = times[start : start + chunk]
        out[start : start + chunk] = np.exp(-1j * np.outer(block, omega)) @ weights
    return out


def tabulate_kernel(model: SpectralModel, taus: np.ndarray, bath: BathSpec | None = None) -> np.ndarray:
    """
    g(tau) (or gtilde(tau) when ``bath`` is given) at many points.

    The Gauss panel count is refined until the values at the largest |tau| and a
    strided sample of the rest are stable.
    """
    taus = np.asarray(taus, dtype=float)
    if model.is_null or taus.size == 0 or (bath is not None and bath.theta == 0):
        return np.zeros(taus.shape, dtype=complex)

    def density(omega):
        values = eval_J(model, omega) / (2 * np.pi)
        if bath is not None:
            values = values * eval_nbar(bath, omega)
        return values

    def on(panels, points):
        omega, w = spectral_nodes(model, panels)
        return fourier_on_nodes(omega, w * density(omega), points)

    stride = max(1, taus.size // 32)
    sample_points = np.unique(np.concatenate([taus[::stride], taus[-8:]]))
    scale = abs(on(8, np.zeros(1))[0])
    panels = converge_panels(
        lambda p: on(p, sample_points),
        initial_panels(model, np.max(np.abs(taus))),
        scale,
        what=f"kernel of {model.cache_key}",
    )
    logger.debug("Tabulating %d kernel points with %d panels", taus.size, panels)
    return on(panels, taus)


def tabulate_g(model: SpectralModel, dt: float, n: int) -> np.ndarray:
    """Cached g(k*dt) for k = 0..n"""
    key = KernelCache.get_g_key(model.cache_key, dt, n)
    return KernelCache.get_or_compute(key, lambda: tabulate_kernel(model, dt * np.arange(n + 1)))


def tabulate_gtilde(model: SpectralModel, bath: BathSpec, dt: float, n: int, sign: int = 1) -> np.ndarray:
    """Cached gtilde(sign*k*dt) for k = 0..n"""
    key = KernelCache.get_gtilde_key(model.cache_key, bath.cache_key, dt, n, sign)
    return KernelCache.get_or_compute(
        key, lambda: tabulate_kernel(model, sign * dt * np.arange(n + 1), bath=bath)
    )


def _fourier_point(model: SpectralModel, tau: float, density, what: str) -> complex:
    """(1/2pi) * integral of density(omega) exp(-i omega tau) over the support"""
    if model.is_null:
        return 0.0j

    if model.kind is ModelKind.WAVEGUIDE:

        def along_band(phi, part):
            omega = model.omega0 + 2 * model.xi0 * math.cos(phi)
            return density(omega) * 2 * model.xi0 * math.sin(phi) * part(omega * tau)

        re = integrate(along_band, 0.0, math.pi, what=what, args=(math.cos,))
        im = integrate(along_band, 0.0, math.pi, what=what, args=(math.sin,))
    elif model.kind is ModelKind.OHMIC_FAMILY:
        if tau == 0:
            re, im = integrate(density, 0.0, math.inf, what=what), 0.0
        else:
            re = integrate(density, 0.0, math.inf, what=what, weight="cos", wvar=abs(tau))
            im = math.copysign(1.0, tau) * integrate(
                density, 0.0, math.inf, what=what, weight="sin", wvar=abs(tau)
            )
    else:
        lo, hi = model.support
        breaks = [s[0] for s in model.samples[1:-1]]
        kwargs = {"points": breaks} if breaks else {}
        re = integrate(lambda w: density(w) * math.cos(w * tau), lo, hi, what=what, **kwargs)
        im = integrate(lambda w: density(w) * math.sin(w * tau), lo, hi, what=what, **kwargs)

    return complex(re, -im) / (2 * np.pi)


def eval_g(model: SpectralModel, tau: float) -> complex:
    """
    Bath correlation g(tau) = int domega/2pi J(omega) exp(-i omega tau) by adaptive quadrature.

    Raises:
        QuadratureError: if the quadrature does not converge
    """
    return _fourier_point(model, float(tau), lambda w: eval_J(model, w), what="g")


def eval_gtilde(model: SpectralModel, bath: BathSpec, tau: float) -> complex:
    """Thermal correlation gtilde(tau), the g integral weighted by the occupation"""
    if bath.theta == 0:
        return 0.0j

    def density(w):
        if w <= 0:
            return 0.0
        return eval_J(model, w) * eval_nbar(bath, w)

    lo, _ = model.support
    if lo < 0 and not model.is_null:
        raise SpectralDomainError(
            "Thermal kernel undefined for a support reaching omega <= 0", lower_edge=lo
        )
    return _fourier_point(model, float(tau), density, what="gtilde")


def g_closed_form(model: SpectralModel, tau):
    """
    Closed forms of g: eta^2 xi0 exp(-i omega0 tau) J1(2 xi0 tau)/tau for the waveguide,
    kappa omega_cut^2 Gamma(p+1) / (1 + i omega_cut tau)^(p+1) for the Ohmic family.
    """
    scalar = np.ndim(tau) == 0
    t = np.asarray(tau, dtype=float)

    if model.kind is ModelKind.WAVEGUIDE:
        safe = np.where(t == 0, 1.0, t)
        ratio = np.where(t == 0, model.xi0, j1(2 * model.xi0 * safe) / safe)
        values = model.eta**2 * model.xi0 * np.exp(-1j * model.omega0 * t) * ratio
    elif model.kind is ModelKind.OHMIC_FAMILY:
        p = model.exponent
        values = model.kappa * model.omega_cut**2 * gamma_fn(p + 1) / (1 + 1j * model.omega_cut * t) ** (p + 1)
    else:
        raise SpectralDomainError("Tabulated models have no closed-form kernel")

    return _returned(np.asarray(values, dtype=complex), scalar)
