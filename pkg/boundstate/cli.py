"""Command line front end: ``boundstate <subcommand> --scenario FILE [--out DIR]``."""

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from boundstate import __version__
from boundstate.errors import (
    BoundStateError,
    EnvelopeDomainError,
    MarkovLimitError,
    ScenarioError,
    SingularWindowError,
)
from boundstate.greenfn import EvolutionProblem, TimeGrid, late_time_summary, solve_u, solve_v
from boundstate.laplace import find_bound_poles, markov_limit, pole_condition_curve, steady_envelope
from boundstate.master import (
    certified_window,
    coefficients,
    fock_cat_state,
    fock_number_state,
    photon_number,
    propagate_fock,
    purity,
    wigner_from_density,
)
from boundstate.scenario import Scenario, parse_scenario, write_scenario
from boundstate.spectral import ModelKind
from boundstate.utils import write_csv, write_frame, write_json, write_table
from boundstate.wigner import (
    CatState,
    GridSpec,
    WignerParams,
    cat_wigner_eval,
    fringe_visibility,
    fringe_visibility_series,
    peak_visibility,
    render_frame,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ERROR = 2

ORACLE_TOLERANCE = 1e-3
SINGLE_EXCITATION_TOLERANCE = 1e-4


def _problem(scenario: Scenario) -> EvolutionProblem:
    grid = TimeGrid.from_horizon(scenario.horizon, scenario.dt)
    return EvolutionProblem(scenario.omega_c, scenario.model, scenario.bath, grid)


def _resonant_envelope(scenario: Scenario) -> dict | None:
    model = scenario.model
    if model.kind is not ModelKind.WAVEGUIDE or scenario.omega_c != model.omega0:
        return None
    try:
        amplitude, frequency = steady_envelope(model.eta, model.xi0)
    except EnvelopeDomainError:
        return None
    return {"A": amplitude, "omega": frequency, "period": math.pi / frequency}


def _grid_index(grid: TimeGrid, t: float) -> int:
    return min(grid.n, max(0, int(round((t - grid.t0) / grid.dt))))


class Command:
    """Base class for subcommands"""

    name = ""
    help = ""

    def add_arguments(self, parser: argparse.ArgumentParser):
        """Subcommand-specific arguments"""

    def handle(self, scenario: Scenario, out: Path, options: argparse.Namespace) -> list[Path]:
        raise NotImplementedError


class SolveCommand(Command):
    """Green function, fluctuation, master-equation coefficients and fringe visibility"""

    name = "solve"
    help = "Solve u(t) and v(t) and write the trajectory table and a late-time summary"

    def handle(self, scenario, out, options):
        problem = _problem(scenario)
        u = solve_u(problem)
        v = solve_v(problem, u)
        coeffs = coefficients(u, v, problem)
        visibility = fringe_visibility_series(CatState(scenario.alpha), u, v)

        table = write_table(
            out / "trajectory.dat",
            ["t", "re_u", "im_u", "abs_u", "v", "omega_prime", "gamma", "gamma_tilde", "F"],
            [
                u.times,
                u.samples.real,
                u.samples.imag,
                u.magnitude,
                v.samples,
                coeffs.omega_prime,
                coeffs.gamma,
                coeffs.gamma_tilde,
                visibility,
            ],
        )

        summary = late_time_summary(u, v, problem)
        summary["singular_samples"] = int(coeffs.singular_flags.sum())
        summary["F_end"] = float(visibility[-1])
        try:
            summary["markov_frequency"], summary["markov_rate"] = markov_limit(scenario.model, scenario.omega_c)
        except MarkovLimitError:
            summary["markov_frequency"] = summary["markov_rate"] = None
        summary["steady_envelope"] = _resonant_envelope(scenario)
        return [table, write_json(out / "summary.json", summary)]


class PolesCommand(Command):
    """Bound-state analysis"""

    name = "poles"
    help = "Find bound poles, residues and the continuum weight"

    def add_arguments(self, parser):
        parser.add_argument(
            "--curve",
            action="store_true",
            help="Also write pole_condition.dat with omega - omega_c - Delta(omega) and J(omega)",
        )
        parser.add_argument("--curve-points", type=int, default=801, help="Samples on the pole-condition curve")

    def handle(self, scenario, out, options):
        report = find_bound_poles(scenario.model, scenario.omega_c)
        document = report.as_dict()
        document["omega_c"] = scenario.omega_c
        try:
            frequency, rate = markov_limit(scenario.model, scenario.omega_c)
            document["markov_limit"] = {"frequency": frequency, "rate": rate}
        except MarkovLimitError:
            document["markov_limit"] = None
        document["steady_envelope"] = _resonant_envelope(scenario)
        written = [write_json(out / "poles.json", document)]

        if getattr(options, "curve", False):
            omega, condition, j = pole_condition_curve(scenario.model, scenario.omega_c, options.curve_points)
            written.append(write_table(out / "pole_condition.dat", ["omega", "condition", "J"], [omega, condition, j]))
        return written


class WignerCommand(Command):
    """Wigner frames of the cat state"""

    name = "wigner"
    help = "Render Wigner frames of the cat state at the scheduled times"

    def handle(self, scenario, out, options):
        problem = _problem(scenario)
        u = solve_u(problem)
        v = solve_v(problem, u)
        cat = CatState(scenario.alpha)

        written, entries = [], []
        for index, t in enumerate(scenario.frame_times):
            params = WignerParams.at(u, v, t)
            grid = GridSpec.default_for(cat, params, scenario.frame_points)
            frame = render_frame(cat, params, grid, time=t)
            name = f"frame_{index:04d}.dat"
            written.append(write_frame(out / "frames" / name, frame))
            entries.append(
                {
                    "index": index,
                    "time": t,
                    "file": f"frames/{name}",
                    "grid": list(grid.as_tuple()),
                    "u": params.u_t,
                    "v": params.v_t,
                    "normalization": frame.normalization,
                    "peak_visibility": peak_visibility(frame),
                    "fringe_visibility": fringe_visibility(cat, params.u_t, params.v_t),
                }
            )
        logger.info("Rendered %d frames", len(entries))
        written.append(write_json(out / "manifest.json", {"alpha": scenario.alpha, "frames": entries}))
        return written


class OracleCheckCommand(Command):
    """Fock-space propagation against the analytic results"""

    name = "oracle-check"
    help = "Propagate the master equation in a truncated Fock space and compare with the analytic results"

    def handle(self, scenario, out, options):
        problem = _problem(scenario)
        grid = problem.grid
        u = solve_u(problem)
        v = solve_v(problem, u)
        coeffs = coefficients(u, v, problem)
        cat = CatState(scenario.alpha)
        window = certified_window(coeffs)
        requested = sorted({_grid_index(grid, t) for t in scenario.oracle_times})
        indices = [k for k in requested if k <= window]
        skipped = [float(grid.times[k]) for k in requested if k > window]
        if skipped:
            logger.warning(
                "Skipping oracle times %s beyond the certified window ending at t=%.12g",
                ", ".join(f"{t:g}" for t in skipped),
                grid.times[window],
            )
        if not indices:
            raise SingularWindowError(
                f"Every oracle time lies beyond the certified window ending at t={grid.times[window]:.12g}",
                index=window + 1,
                time=float(grid.times[window + 1]),
            )

        rho0 = fock_cat_state(cat, scenario.oracle_n_max)
        n0 = photon_number(rho0)
        snapshots = propagate_fock(rho0, coeffs, grid, indices, substeps=scenario.oracle_substeps)

        checks = []
        for k, rho in zip(indices, snapshots):
            params = WignerParams.from_uv(u.samples[k], v.samples[k])
            frame_grid = GridSpec.default_for(cat, params, scenario.oracle_points)
            points = frame_grid.points
            deviation = np.max(np.abs(wigner_from_density(rho, points) - cat_wigner_eval(cat, params, points)))
            expected_number = abs(u.samples[k]) ** 2 * n0 + v.samples[k]
            checks.append(
                {
                    "time": float(grid.times[k]),
                    "wigner_max_deviation": float(deviation),
                    "trace_drift": abs(float(np.trace(rho.matrix).real) - 1.0),
                    "photon_number": photon_number(rho),
                    "photon_number_deviation": abs(photon_number(rho) - expected_number),
                    "purity": purity(rho),
                    "fringe_visibility": fringe_visibility(cat, u.samples[k], v.samples[k]),
                }
            )

        report = {
            "n_max": scenario.oracle_n_max,
            "alpha": scenario.alpha,
            "tolerance": ORACLE_TOLERANCE,
            "certified_window_end": float(grid.times[window]),
            "skipped_times": skipped,
            "checks": checks,
            "max_wigner_deviation": max(c["wigner_max_deviation"] for c in checks),
            "max_trace_drift": max(c["trace_drift"] for c in checks),
        }
        report["passed"] = report["max_wigner_deviation"] < ORACLE_TOLERANCE

        if problem.bath.theta == 0:
            report["single_excitation"] = self._single_excitation(u, coeffs, grid, indices[-1])
        return [write_json(out / "oracle_check.json", report)]

    @staticmethod
    def _single_excitation(u, coeffs, grid, stop) -> dict:
        """<1|rho|1> against |u|^2 starting from |1><1|"""
        rho0 = fock_number_state(1, 3)
        snapshots = propagate_fock(rho0, coeffs, grid, range(stop + 1))
        populations = np.array([rho.matrix[1, 1].real for rho in snapshots])
        deviation = float(np.max(np.abs(populations - u.magnitude[: stop + 1] ** 2)))
        return {
            "window_end": float(grid.times[stop]),
            "max_deviation": deviation,
            "passed": deviation < SINGLE_EXCITATION_TOLERANCE,
        }


def _sweep_point(scenario: Scenario, eta: float) -> dict:
    model = replace(scenario.model, eta=eta)
    report = find_bound_poles(model, scenario.omega_c)
    envelope = _resonant_envelope(replace(scenario, model=model))
    return {
        "eta": eta,
        "pole_count": len(report.bound_poles),
        "poles": [p.omega for p in report.bound_poles],
        "residues": [p.residue for p in report.bound_poles],
        "residue_sum": report.residue_sum,
        "A": envelope["A"] if envelope else None,
        "omega_osc": envelope["omega"] if envelope else None,
        "critical_coupling": report.critical_coupling,
        "continuum_weight": report.continuum_weight,
        "sum_rule_residual": report.sum_rule_residual,
        "marginal_count": len(report.marginal_poles),
    }


class SweepCommand(Command):
    """Pole structure over a grid of couplings"""

    name = "sweep"
    help = "Repeat the pole analysis for every coupling in [sweep] eta"

    def handle(self, scenario, out, options):
        if scenario.model.kind is not ModelKind.WAVEGUIDE:
            raise ScenarioError("sweep needs a waveguide model", section="spectral", key="kind")
        etas = scenario.sweep_etas or (scenario.model.eta,)
        with ThreadPoolExecutor(max_workers=scenario.sweep_workers) as executor:
            rows = list(executor.map(lambda eta: _sweep_point(scenario, eta), etas))

        written = []
        for index, row in enumerate(rows):
            written.append(write_json(out / "sweep" / f"eta_{index:03d}.json", row))
        header = [
            "eta",
            "pole_count",
            "poles",
            "residue_sum",
            "A",
            "omega_osc",
            "critical_coupling",
            "continuum_weight",
            "sum_rule_residual",
        ]
        table = [
            [
                row["eta"],
                row["pole_count"],
                ";".join(f"{p:.12g}" for p in row["poles"]),
                row["residue_sum"],
                row["A"],
                row["omega_osc"],
                row["critical_coupling"],
                row["continuum_weight"],
                row["sum_rule_residual"],
            ]
            for row in rows
        ]
        written.insert(0, write_csv(out / "sweep.csv", header, table))
        return written


COMMANDS = {cls.name: cls for cls in (SolveCommand, PolesCommand, WignerCommand, OracleCheckCommand, SweepCommand)}


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="boundstate", description="Non-Markovian cavity dynamics in structured reservoirs")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)
    for name, cls in COMMANDS.items():
        command = cls()
        sub = subparsers.add_parser(name, help=command.help, description=command.help)
        sub.add_argument("--scenario", required=True, type=Path, help="Scenario INI file")
        sub.add_argument("--out", type=Path, help="Output directory (default: [output] directory)")
        sub.add_argument("-v", "--verbose", action="store_true", help="Log debug messages")
        command.add_arguments(sub)
    return parser


def main(argv=None) -> int:
    options = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if options.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    command = COMMANDS[options.command]()
    try:
        scenario = parse_scenario(options.scenario)
        out = options.out or Path(scenario.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = command.handle(scenario, out, options)
        written.append(write_scenario(scenario, out / "scenario.ini"))
    except BoundStateError as e:
        logger.exception("%s failed", command.name)
        print(json.dumps(e.as_dict(), sort_keys=True, default=str))
        return EXIT_ERROR
    except ValueError as e:
        logger.exception("%s failed", command.name)
        print(json.dumps({"error": "invalid_value", "message": str(e), "details": {}}, sort_keys=True))
        return EXIT_ERROR
    except OSError as e:
        logger.exception("%s failed", command.name)
        details = {"path": e.filename} if e.filename else {}
        print(json.dumps({"error": "io_error", "message": str(e), "details": details}, sort_keys=True, default=str))
        return EXIT_ERROR

    logger.info("%s wrote %d files to %s", command.name, len(written), out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
