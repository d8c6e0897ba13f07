from functools import lru_cache
from pathlib import Path

import numpy as np

from boundstate.greenfn import EvolutionProblem, TimeGrid, solve_u, solve_v
from boundstate.spectral import BathSpec, SpectralModel


def create_waveguide(eta: float, omega0: float = 0.0, xi0: float = 1.0) -> SpectralModel:
    """Create a waveguide reservoir for testing"""
    return SpectralModel.waveguide(eta=eta, omega0=omega0, xi0=xi0)


def create_problem(
    eta: float,
    horizon: float = 20.0,
    dt: float = 1e-3,
    omega0: float = 0.0,
    nbar: float | None = None,
    omega_c: float | None = None,
) -> EvolutionProblem:
    """
    Create a cavity coupled to a waveguide, resonant with the band centre unless ``omega_c`` is given.

    ``nbar`` fixes the bath temperature through the occupation at the band centre.
    """
    model = create_waveguide(eta, omega0)
    bath = BathSpec.from_nbar(nbar, omega0) if nbar else BathSpec()
    grid = TimeGrid.from_horizon(horizon, dt)
    return EvolutionProblem(omega0 if omega_c is None else omega_c, model, bath, grid)


@lru_cache(maxsize=None)
def solved_waveguide(
    eta: float,
    horizon: float = 20.0,
    dt: float = 1e-3,
    omega0: float = 0.0,
    nbar: float | None = None,
):
    """
    Solve u and v once per parameter set and share the result between test cases.

    Returns:
        (problem, u, v)
    """
    problem = create_problem(eta, horizon, dt, omega0, nbar)
    u = solve_u(problem)
    v = solve_v(problem, u)
    return problem, u, v


def write_scenario_file(directory, text: str, name: str = "scenario.ini") -> Path:
    """Write a scenario file into ``directory`` and return its path"""
    path = Path(directory) / name
    path.write_text(text, encoding="utf-8")
    return path


def read_frame(path) -> tuple[float, tuple, np.ndarray]:
    """Parse a written Wigner frame into (time, grid tuple, values)"""
    path = Path(path)
    with path.open(encoding="utf-8") as handle:
        header = handle.readline().lstrip("#").split()
    fields = dict(item.split("=", 1) for item in header[:2])
    x_min, x_max, nx, y_min, y_max, ny = [fields["grid"]] + header[2:]
    grid = (float(x_min), float(x_max), int(nx), float(y_min), float(y_max), int(ny))
    values = np.loadtxt(path, comments="#", ndmin=2)
    return float(fields["t"]), grid, values
