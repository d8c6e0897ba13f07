"""Scenario files: INI sections describing one cavity-reservoir computation.

Frequencies are read in units of xi0 (times in 1/xi0) unless ``[spectral] units =
absolute``. A parsed ``Scenario`` always holds absolute values, and
``write_scenario`` echoes it with ``units = absolute``.
"""

import configparser
import dataclasses
import logging
import math
from pathlib import Path

from boundstate import app_settings
from boundstate.errors import ScenarioError, SpectralDomainError
from boundstate.spectral import BathSpec, ModelKind, SpectralModel

logger = logging.getLogger(__name__)

UNITS_XI0 = "xi0"
UNITS_ABSOLUTE = "absolute"

ALLOWED_KEYS = {
    "spectral": {"kind", "units", "eta", "omega0", "xi0", "kappa", "omega_cut", "exponent", "table", "samples"},
    "system": {"omega_c"},
    "bath": {"theta", "nbar"},
    "grid": {"dt", "horizon"},
    "cat": {"alpha"},
    "frames": {"times", "points"},
    "oracle": {"n_max", "times", "points", "substeps"},
    "sweep": {"eta", "workers"},
    "output": {"directory"},
}


@dataclasses.dataclass(frozen=True)
class Scenario:
    """A fully resolved computation in absolute units"""

    model: SpectralModel
    omega_c: float
    theta: float | None = None
    nbar: float | None = None
    dt: float = app_settings.BOUNDSTATE_DEFAULT_DT
    horizon: float = app_settings.BOUNDSTATE_DEFAULT_HORIZON
    alpha: complex = 1.0 + 0.0j
    frame_times: tuple[float, ...] = ()
    frame_points: int = app_settings.BOUNDSTATE_FRAME_POINTS
    oracle_n_max: int = app_settings.BOUNDSTATE_DEFAULT_NMAX
    oracle_times: tuple[float, ...] = ()
    oracle_points: int = 81
    oracle_substeps: int = 1
    sweep_etas: tuple[float, ...] = ()
    sweep_workers: int = app_settings.BOUNDSTATE_SWEEP_WORKERS
    output_dir: str = "out"

    @property
    def nbar_frequency(self) -> float:
        """Frequency at which ``nbar`` fixes the temperature: the band centre, or omega_c off the waveguide"""
        if self.model.kind is ModelKind.WAVEGUIDE:
            return self.model.omega0
        return self.omega_c

    @property
    def bath(self) -> BathSpec:
        if self.nbar is not None:
            return BathSpec.from_nbar(self.nbar, self.nbar_frequency)
        return BathSpec(self.theta or 0.0)

    @property
    def period(self) -> float:
        """T0 = 2 pi / omega0 (2 pi / omega_c off the waveguide)"""
        return period_for(self.model, self.omega_c)


def period_for(model: SpectralModel, omega_c: float) -> float:
    reference = model.omega0 if model.kind is ModelKind.WAVEGUIDE else omega_c
    if not reference > 0:
        raise ScenarioError("T0 needs a positive reference frequency", key="T0", reference=reference)
    return 2 * math.pi / reference


def _float(section: str, key: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError as e:
        raise ScenarioError(f"[{section}] {key} = {raw!r} is not a number", section=section, key=key) from e
    if not math.isfinite(value):
        raise ScenarioError(f"[{section}] {key} must be finite", section=section, key=key)
    return value


def _int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as e:
        raise ScenarioError(f"[{section}] {key} = {raw!r} is not an integer", section=section, key=key) from e


def _complex(section: str, key: str, raw: str) -> complex:
    try:
        return complex(raw.replace(" ", ""))
    except ValueError as e:
        raise ScenarioError(f"[{section}] {key} = {raw!r} is not a complex number", section=section, key=key) from e


def _list(raw: str) -> list[str]:
    return [token.strip() for token in raw.split(",") if token.strip()]


def _times(section: str, key: str, raw: str, time_unit: float, period) -> tuple[float, ...]:
    """Comma-separated times; a 'T0' suffix multiplies by the period"""
    values = []
    for token in _list(raw):
        if token.endswith("T0"):
            count = token[:-2].strip()
            values.append((_float(section, key, count) if count else 1.0) * period())
        else:
            values.append(_float(section, key, token) * time_unit)
    return tuple(values)


def _samples(raw: str) -> list[tuple[float, float]]:
    pairs = []
    for token in _list(raw):
        omega, _, value = token.partition(":")
        pairs.append((_float("spectral", "samples", omega), _float("spectral", "samples", value)))
    return pairs


def _parse_model(section: configparser.SectionProxy, base_dir: Path) -> tuple[SpectralModel, float, float]:
    """The spectral model in absolute units, the frequency unit and the time unit"""
    units = section.get("units", UNITS_XI0).strip().lower()
    if units not in (UNITS_XI0, UNITS_ABSOLUTE):
        raise ScenarioError(f"[spectral] units must be {UNITS_XI0!r} or {UNITS_ABSOLUTE!r}", key="units")
    xi0 = _float("spectral", "xi0", section.get("xi0", "1"))
    if not xi0 > 0:
        raise ScenarioError("[spectral] xi0 must be positive", key="xi0")
    scale = xi0 if units == UNITS_XI0 else 1.0

    kind_raw = section.get("kind")
    if kind_raw is None:
        raise ScenarioError("[spectral] kind is required", key="kind")
    try:
        kind = ModelKind(kind_raw.strip().lower())
    except ValueError as e:
        raise ScenarioError(f"[spectral] unknown kind {kind_raw!r}", key="kind") from e

    try:
        if kind is ModelKind.WAVEGUIDE:
            model = SpectralModel.waveguide(
                eta=_float("spectral", "eta", section.get("eta", "1")),
                omega0=_float("spectral", "omega0", section.get("omega0", "0")) * scale,
                xi0=xi0,
            )
        elif kind is ModelKind.OHMIC_FAMILY:
            model = SpectralModel.ohmic(
                kappa=_float("spectral", "kappa", section.get("kappa", "0")),
                omega_cut=_float("spectral", "omega_cut", section.get("omega_cut", "1")) * scale,
                exponent=_float("spectral", "exponent", section.get("exponent", "1")),
            )
        else:
            if "samples" in section and "table" in section:
                raise ScenarioError("[spectral] give either table or samples, not both", key="table")
            if "samples" in section:
                samples = _samples(section["samples"])
            elif "table" in section:
                table = Path(section["table"])
                if not table.is_absolute():
                    table = base_dir / table
                try:
                    samples = SpectralModel.from_table_file(table).samples
                except SpectralDomainError as e:
                    raise ScenarioError(f"Invalid spectral table: {e}", key="table", **e.details) from e
            else:
                raise ScenarioError("[spectral] a tabulated model needs table or samples", key="table")
            model = SpectralModel.tabulated((w * scale, j * scale) for w, j in samples)
    except SpectralDomainError as e:
        raise ScenarioError(f"Invalid spectral model: {e}", key="kind", **e.details) from e

    return model, scale, 1.0 / scale


def parse_scenario(path) -> Scenario:
    """
    Read and validate a scenario file.

    Raises:
        ScenarioError: for unknown sections or keys, contradictory temperature
            fields or invalid values; the details name the offending key
    """
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"Scenario file {path} does not exist", path=str(path))

    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ScenarioError(f"Cannot parse scenario {path}: {e}", path=str(path)) from e

    for section in parser.sections():
        if section not in ALLOWED_KEYS:
            raise ScenarioError(f"Unknown section [{section}]", section=section, key=section)
        for key in parser[section]:
            if key not in ALLOWED_KEYS[section]:
                raise ScenarioError(f"Unknown key {key!r} in [{section}]", section=section, key=key)

    if not parser.has_section("spectral"):
        raise ScenarioError("Scenario needs a [spectral] section", key="spectral")
    if not parser.has_option("system", "omega_c"):
        raise ScenarioError("Scenario needs [system] omega_c", section="system", key="omega_c")

    def get(section, key, default=None):
        return parser.get(section, key, fallback=default)

    model, freq_unit, time_unit = _parse_model(parser["spectral"], path.parent)
    omega_c = _float("system", "omega_c", get("system", "omega_c")) * freq_unit

    theta_raw, nbar_raw = get("bath", "theta"), get("bath", "nbar")
    if theta_raw is not None and nbar_raw is not None:
        raise ScenarioError("[bath] theta and nbar are mutually exclusive", section="bath", key="nbar")
    theta = _float("bath", "theta", theta_raw) * freq_unit if theta_raw is not None else None
    nbar = _float("bath", "nbar", nbar_raw) if nbar_raw is not None else None
    if theta is not None and theta < 0:
        raise ScenarioError("[bath] theta must be non-negative", section="bath", key="theta")
    if nbar is not None and nbar < 0:
        raise ScenarioError("[bath] nbar must be non-negative", section="bath", key="nbar")

    dt = _float("grid", "dt", get("grid", "dt", repr(app_settings.BOUNDSTATE_DEFAULT_DT))) * time_unit
    horizon = _float("grid", "horizon", get("grid", "horizon", repr(app_settings.BOUNDSTATE_DEFAULT_HORIZON)))
    horizon *= time_unit
    if not dt > 0:
        raise ScenarioError("[grid] dt must be positive", section="grid", key="dt")
    if not horizon > 0:
        raise ScenarioError("[grid] horizon must be positive", section="grid", key="horizon")

    def period():
        return period_for(model, omega_c)

    frame_times = (
        _times("frames", "times", get("frames", "times"), time_unit, period)
        if parser.has_option("frames", "times")
        else tuple(horizon * k / 4 for k in range(5))
    )
    oracle_times = (
        _times("oracle", "times", get("oracle", "times"), time_unit, period)
        if parser.has_option("oracle", "times")
        else (0.0, horizon / 4, horizon / 2)
    )
    for section, values in (("frames", frame_times), ("oracle", oracle_times)):
        for t in values:
            if not 0 <= t <= horizon * (1 + 1e-12):
                raise ScenarioError(
                    f"[{section}] time {t:g} lies outside [0, horizon={horizon:g}]", section=section, key="times"
                )

    sweep_etas = tuple(_float("sweep", "eta", token) for token in _list(get("sweep", "eta", "")))

    scenario = Scenario(
        model=model,
        omega_c=omega_c,
        theta=theta,
        nbar=nbar,
        dt=dt,
        horizon=horizon,
        alpha=_complex("cat", "alpha", get("cat", "alpha", "1")),
        frame_times=frame_times,
        frame_points=_int("frames", "points", get("frames", "points", str(app_settings.BOUNDSTATE_FRAME_POINTS))),
        oracle_n_max=_int("oracle", "n_max", get("oracle", "n_max", str(app_settings.BOUNDSTATE_DEFAULT_NMAX))),
        oracle_times=oracle_times,
        oracle_points=_int("oracle", "points", get("oracle", "points", "81")),
        oracle_substeps=_int("oracle", "substeps", get("oracle", "substeps", "1")),
        sweep_etas=sweep_etas,
        sweep_workers=_int("sweep", "workers", get("sweep", "workers", str(app_settings.BOUNDSTATE_SWEEP_WORKERS))),
        output_dir=get("output", "directory", "out"),
    )

    for key, value in (
        ("points", scenario.frame_points),
        ("n_max", scenario.oracle_n_max),
        ("substeps", scenario.oracle_substeps),
        ("workers", scenario.sweep_workers),
    ):
        if value < 1:
            raise ScenarioError(f"{key} must be at least 1", key=key)

    # Bath resolution validates nbar against its reference frequency
    try:
        scenario.bath  # pylint: disable=pointless-statement
    except SpectralDomainError as e:
        raise ScenarioError(f"Invalid bath: {e}", section="bath", key="nbar", **e.details) from e

    logger.info("Parsed scenario %s (%s, omega_c=%g)", path, model.kind.value, omega_c)
    return scenario


def _join(values) -> str:
    return ", ".join(repr(float(v)) for v in values)


def write_scenario(scenario: Scenario, path) -> Path:
    """Write ``scenario`` in absolute units so that it re-parses to an equal Scenario"""
    model = scenario.model
    parser = configparser.ConfigParser(interpolation=None)
    spectral = {"kind": model.kind.value, "units": UNITS_ABSOLUTE}
    if model.kind is ModelKind.WAVEGUIDE:
        spectral.update(eta=repr(model.eta), omega0=repr(model.omega0), xi0=repr(model.xi0))
    elif model.kind is ModelKind.OHMIC_FAMILY:
        spectral.update(kappa=repr(model.kappa), omega_cut=repr(model.omega_cut), exponent=repr(model.exponent))
    else:
        spectral["samples"] = ", ".join(f"{w!r}:{j!r}" for w, j in model.samples)
    parser["spectral"] = spectral
    parser["system"] = {"omega_c": repr(scenario.omega_c)}

    bath = {}
    if scenario.theta is not None:
        bath["theta"] = repr(scenario.theta)
    if scenario.nbar is not None:
        bath["nbar"] = repr(scenario.nbar)
    if bath:
        parser["bath"] = bath

    parser["grid"] = {"dt": repr(scenario.dt), "horizon": repr(scenario.horizon)}
    parser["cat"] = {"alpha": repr(scenario.alpha)}
    parser["frames"] = {"times": _join(scenario.frame_times), "points": str(scenario.frame_points)}
    parser["oracle"] = {
        "n_max": str(scenario.oracle_n_max),
        "times": _join(scenario.oracle_times),
        "points": str(scenario.oracle_points),
        "substeps": str(scenario.oracle_substeps),
    }
    sweep = {"workers": str(scenario.sweep_workers)}
    if scenario.sweep_etas:
        sweep["eta"] = _join(scenario.sweep_etas)
    parser["sweep"] = sweep
    parser["output"] = {"directory": scenario.output_dir}

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        parser.write(handle)
    return path
