"""Tests for the command line front end."""

import csv
import io
import json
import tempfile
from pathlib import Path
from unittest import TestCase
from unittest.mock import patch

from boundstate.cli import EXIT_ERROR, EXIT_OK, EXIT_USAGE, main
from boundstate.scenario import parse_scenario
from boundstate.tests.utils import read_frame, write_scenario_file


class CommandTestCase(TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.directory = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def run_command(self, command: str, text: str, out: str = "out", extra=()) -> tuple[int, Path, str]:
        """Run a subcommand on a scenario text; returns (exit code, output directory, stdout)"""
        path = write_scenario_file(self.directory, text)
        target = self.directory / out
        with patch("sys.stdout", new_callable=io.StringIO) as stdout:
            code = main([command, "--scenario", str(path), "--out", str(target), *extra])
        return code, target, stdout.getvalue()


class TestPolesCommand(CommandTestCase):
    def test_strong_coupling(self):
        """Test the pole report for eta = 2 at resonance"""
        code, out, _ = self.run_command("poles", "[spectral]\nkind = waveguide\neta = 2\n[system]\nomega_c = 0\n")

        self.assertEqual(code, EXIT_OK)
        report = json.loads((out / "poles.json").read_text(encoding="utf-8"))
        omegas = sorted(p["Omega"] for p in report["bound_poles"])
        self.assertEqual(omegas, [-2.30940107676, 2.30940107676])
        self.assertEqual([p["Z"] for p in report["bound_poles"]], [0.333333333333, 0.333333333333])
        self.assertEqual(report["steady_envelope"]["A"], 0.666666666667)
        self.assertEqual(report["band"], {"omega_e": -2.0, "omega_max": 2.0})

    def test_pole_condition_curve(self):
        """Test --curve writes the pole condition and J around the band"""
        code, out, _ = self.run_command(
            "poles",
            "[spectral]\nkind = waveguide\neta = 2\n[system]\nomega_c = 0\n",
            extra=("--curve", "--curve-points", "121"),
        )

        self.assertEqual(code, EXIT_OK)
        lines = (out / "pole_condition.dat").read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "# omega condition J")
        rows = [[float(x) for x in line.split()] for line in lines[1:]]
        self.assertEqual(len(rows), 121)
        self.assertEqual(rows[0][0], -6.0)
        self.assertEqual(rows[-1][0], 6.0)
        self.assertLess(rows[0][1], 0)
        self.assertGreater(rows[-1][1], 0)
        self.assertAlmostEqual(rows[60][1], 0.0, places=9)
        self.assertAlmostEqual(rows[60][2], 8.0, places=9)
        self.assertTrue(all(row[2] == 0 for row in rows if abs(row[0]) > 2))

    def test_curve_is_opt_in(self):
        """Test the pole condition is only written on request"""
        code, out, _ = self.run_command("poles", "[spectral]\nkind = waveguide\neta = 2\n[system]\nomega_c = 0\n")
        self.assertEqual(code, EXIT_OK)
        self.assertFalse((out / "pole_condition.dat").exists())

    def test_flat_table(self):
        """Test a tabulated density that is nonzero at both edges binds on either side"""
        code, out, _ = self.run_command(
            "poles", "[spectral]\nkind = tabulated\nsamples = 1:1, 2:1, 3:1\n[system]\nomega_c = 2\n"
        )

        self.assertEqual(code, EXIT_OK)
        report = json.loads((out / "poles.json").read_text(encoding="utf-8"))
        omegas = sorted(p["Omega"] for p in report["bound_poles"])
        self.assertEqual(len(omegas), 2)
        self.assertLess(omegas[0], 1.0)
        self.assertGreater(omegas[1], 3.0)
        self.assertLess(abs(report["sum_rule_residual"]), 1e-6)

    def test_band_edge_cavity(self):
        """Test a cavity on the band edge reports a marginal critical coupling"""
        code, out, _ = self.run_command("poles", "[spectral]\nkind = waveguide\neta = 1\n[system]\nomega_c = 2\n")

        self.assertEqual(code, EXIT_OK)
        report = json.loads((out / "poles.json").read_text(encoding="utf-8"))
        self.assertEqual(report["critical_coupling"], 0.0)
        self.assertTrue(report["critical_marginal"])

    def test_deterministic(self):
        """Test repeated runs write identical bytes"""
        text = "[spectral]\nkind = waveguide\neta = 1.7\nomega0 = 1\n[system]\nomega_c = 1.3\n"
        _, first, _ = self.run_command("poles", text, out="first")
        _, second, _ = self.run_command("poles", text, out="second")
        self.assertEqual((first / "poles.json").read_bytes(), (second / "poles.json").read_bytes())

    def test_scenario_echo(self):
        """Test the echoed scenario re-parses to the scenario that ran"""
        text = "[spectral]\nkind = waveguide\neta = 2\nxi0 = 0.5\n[system]\nomega_c = 0.25\n[bath]\ntheta = 1\n"
        path = write_scenario_file(self.directory, text, "original.ini")
        _, out, _ = self.run_command("poles", text)
        self.assertEqual(parse_scenario(out / "scenario.ini"), parse_scenario(path))


class TestSolveCommand(CommandTestCase):
    def test_free_cavity(self):
        """Test a null reservoir keeps full fringe visibility"""
        code, out, _ = self.run_command(
            "solve",
            "[spectral]\nkind = waveguide\neta = 0\n[system]\nomega_c = 1\n[grid]\ndt = 0.01\nhorizon = 1\n",
        )

        self.assertEqual(code, EXIT_OK)
        lines = (out / "trajectory.dat").read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "# t re_u im_u abs_u v omega_prime gamma gamma_tilde F")
        self.assertEqual(len(lines), 102)
        self.assertTrue(all(line.split()[-1] == "1" for line in lines[1:]))
        self.assertTrue(all(line.split()[3] == "1" for line in lines[1:]))

        summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        self.assertEqual(summary["F_end"], 1.0)
        self.assertEqual(summary["singular_samples"], 0)

    def test_thermal_columns(self):
        """Test a hot bath produces a growing fluctuation column"""
        code, out, _ = self.run_command(
            "solve",
            "[spectral]\nkind = waveguide\neta = 0.5\nomega0 = 10\n[system]\nomega_c = 10\n"
            "[bath]\nnbar = 0.5\n[grid]\ndt = 0.01\nhorizon = 2\n",
        )

        self.assertEqual(code, EXIT_OK)
        rows = [line.split() for line in (out / "trajectory.dat").read_text(encoding="utf-8").splitlines()[1:]]
        self.assertEqual(rows[0][4], "0")
        self.assertGreater(float(rows[-1][4]), 0.0)
        summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        self.assertEqual(summary["markov_rate"], 0.25)


class TestSweepCommand(CommandTestCase):
    def test_binding_threshold(self):
        """Test the sweep across the binding threshold"""
        code, out, _ = self.run_command(
            "sweep",
            "[spectral]\nkind = waveguide\neta = 1\n[system]\nomega_c = 0\n[sweep]\neta = 1.40, 1.42\nworkers = 2\n",
        )

        self.assertEqual(code, EXIT_OK)
        with (out / "sweep.csv").open(encoding="utf-8", newline="") as handle:
            rows = list(csv.DictReader(handle))
        self.assertEqual([row["eta"] for row in rows], ["1.4", "1.42"])
        self.assertEqual([row["pole_count"] for row in rows], ["0", "2"])
        self.assertEqual(rows[0]["A"], "")
        self.assertTrue((out / "sweep" / "eta_001.json").exists())

    def test_requires_waveguide(self):
        """Test the sweep refuses other reservoir families"""
        code, _, stdout = self.run_command(
            "sweep", "[spectral]\nkind = ohmic\nkappa = 0.1\n[system]\nomega_c = 1\n[sweep]\neta = 1\n"
        )
        self.assertEqual(code, EXIT_ERROR)
        self.assertEqual(json.loads(stdout)["error"], "scenario")


class TestWignerCommand(CommandTestCase):
    def test_frames(self):
        """Test frames and the manifest are written for every scheduled time"""
        code, out, _ = self.run_command(
            "wigner",
            "[spectral]\nkind = waveguide\neta = 2\n[system]\nomega_c = 0\n[grid]\ndt = 0.01\nhorizon = 1\n"
            "[frames]\ntimes = 0, 1\npoints = 41\n",
        )

        self.assertEqual(code, EXIT_OK)
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        files = [frame["file"] for frame in manifest["frames"]]
        self.assertEqual(files, ["frames/frame_0000.dat", "frames/frame_0001.dat"])
        self.assertEqual(manifest["frames"][0]["fringe_visibility"], 1.0)

        time, grid, values = read_frame(out / "frames" / "frame_0001.dat")
        self.assertEqual(time, 1.0)
        self.assertEqual(grid[2], 41)
        self.assertEqual(values.shape, (41, 41))


class TestOracleCheckCommand(CommandTestCase):
    def test_zero_temperature(self):
        """Test the Fock propagation agrees with the analytic results"""
        code, out, _ = self.run_command(
            "oracle-check",
            "[spectral]\nkind = waveguide\neta = 0.5\n[system]\nomega_c = 0\n[grid]\ndt = 0.001\nhorizon = 2\n"
            "[oracle]\nn_max = 20\ntimes = 0, 1, 2\npoints = 21\n",
        )

        self.assertEqual(code, EXIT_OK)
        report = json.loads((out / "oracle_check.json").read_text(encoding="utf-8"))
        self.assertTrue(report["passed"])
        self.assertEqual(len(report["checks"]), 3)
        self.assertLess(report["max_trace_drift"], 1e-8)
        self.assertTrue(report["single_excitation"]["passed"])

    def test_strong_coupling_window(self):
        """Test oracle times past the first singular sample are skipped and reported"""
        code, out, _ = self.run_command(
            "oracle-check",
            "[spectral]\nkind = waveguide\neta = 4\n[system]\nomega_c = 0\n[grid]\ndt = 0.002\nhorizon = 5\n"
            "[cat]\nalpha = 1\n[oracle]\nn_max = 12\ntimes = 0, 0.2, 2.5\npoints = 21\nsubsteps = 4\n",
        )

        self.assertEqual(code, EXIT_OK)
        report = json.loads((out / "oracle_check.json").read_text(encoding="utf-8"))
        self.assertGreater(report["certified_window_end"], 0.3)
        self.assertLess(report["certified_window_end"], 0.4)
        self.assertEqual(report["skipped_times"], [2.5])
        self.assertEqual([c["time"] for c in report["checks"]], [0.0, 0.2])
        self.assertTrue(report["passed"])
        self.assertEqual(report["single_excitation"]["window_end"], 0.2)

    def test_nothing_inside_window(self):
        """Test a schedule entirely past the certified window is an error"""
        code, _, stdout = self.run_command(
            "oracle-check",
            "[spectral]\nkind = waveguide\neta = 4\n[system]\nomega_c = 0\n[grid]\ndt = 0.002\nhorizon = 5\n"
            "[cat]\nalpha = 1\n[oracle]\nn_max = 12\ntimes = 2.5\npoints = 21\n",
        )

        self.assertEqual(code, EXIT_ERROR)
        self.assertEqual(json.loads(stdout)["error"], "singular_window")


class TestErrors(CommandTestCase):
    def test_scenario_error(self):
        """Test errors are reported as JSON on stdout with exit code 2"""
        code, _, stdout = self.run_command(
            "solve", "[spectral]\nkind = waveguide\n[system]\nomega_c = 0\n[bath]\ntheta = 1\nnbar = 1\n"
        )

        self.assertEqual(code, EXIT_ERROR)
        error = json.loads(stdout)
        self.assertEqual(error["error"], "scenario")
        self.assertEqual(error["details"]["key"], "nbar")

    def test_missing_table_file(self):
        """Test an absent spectral table is reported as a scenario error"""
        code, _, stdout = self.run_command(
            "poles", "[spectral]\nkind = tabulated\ntable = nope.txt\n[system]\nomega_c = 1\n"
        )

        self.assertEqual(code, EXIT_ERROR)
        error = json.loads(stdout)
        self.assertEqual(error["error"], "scenario")
        self.assertEqual(error["details"]["key"], "table")
        self.assertTrue(error["details"]["path"].endswith("nope.txt"))

    def test_unwritable_output(self):
        """Test file system failures are reported as JSON with exit code 2"""
        blocker = self.directory / "taken"
        blocker.write_text("", encoding="utf-8")
        code, _, stdout = self.run_command(
            "poles", "[spectral]\nkind = waveguide\neta = 2\n[system]\nomega_c = 0\n", out="taken/out"
        )

        self.assertEqual(code, EXIT_ERROR)
        self.assertEqual(json.loads(stdout)["error"], "io_error")

    def test_missing_scenario_argument(self):
        """Test usage errors exit with code 1"""
        with patch("sys.stderr", new_callable=io.StringIO):
            with self.assertRaises(SystemExit) as cm:
                main(["solve"])
        self.assertEqual(cm.exception.code, EXIT_USAGE)

    def test_unknown_command(self):
        """Test unknown subcommands are usage errors"""
        with patch("sys.stderr", new_callable=io.StringIO):
            with self.assertRaises(SystemExit) as cm:
                main(["animate", "--scenario", "x.ini"])
        self.assertEqual(cm.exception.code, EXIT_USAGE)
