"""Tests for the Green function and fluctuation solvers."""

import math
from unittest import TestCase
from unittest.mock import patch

import numpy as np

from boundstate import app_settings
from boundstate.errors import SolverInstabilityError
from boundstate.greenfn import (
    EvolutionProblem,
    TimeGrid,
    fit_markov_parameters,
    late_time_summary,
    normalized_fluctuation,
    oscillation_peaks,
    solve_u,
    solve_v,
    udot,
    udot_series,
    vdot,
)
from boundstate.laplace import steady_envelope
from boundstate.spectral import BathSpec
from boundstate.tests.utils import create_problem, create_waveguide, solved_waveguide


class TestTimeGrid(TestCase):
    def test_single_step(self):
        """Test the smallest grid holds the initial point and one step"""
        grid = TimeGrid(dt=0.1, n=1)
        np.testing.assert_allclose(grid.times, [0.0, 0.1])

    def test_invalid_grid(self):
        """Test grids without steps or with non-positive dt are rejected"""
        with self.assertRaises(ValueError):
            TimeGrid(dt=0.1, n=0)
        with self.assertRaises(ValueError):
            TimeGrid(dt=0.0, n=10)

    def test_from_horizon(self):
        """Test building a grid from its horizon"""
        grid = TimeGrid.from_horizon(2.0, 0.01)
        self.assertEqual(grid.n, 200)
        self.assertAlmostEqual(grid.horizon, 2.0)

    def test_default_step(self):
        """Test the default step comes from the settings"""
        grid = TimeGrid.from_horizon(1.0)
        self.assertEqual(grid.dt, app_settings.BOUNDSTATE_DEFAULT_DT)


class TestSolveU(TestCase):
    def test_free_evolution(self):
        """Test a null reservoir gives u = exp(-i omega_c t)"""
        problem = create_problem(0.0, horizon=5.0, dt=0.01, omega_c=3.0)
        u = solve_u(problem)
        np.testing.assert_allclose(u.samples, np.exp(-3j * u.times), atol=1e-14)
        np.testing.assert_allclose(u.magnitude, 1.0, atol=1e-14)

    def test_initial_condition(self):
        """Test u(0) = 1 exactly"""
        _, u, _ = solved_waveguide(4.0)
        self.assertEqual(u.samples[0], 1.0)

    def test_contractive(self):
        """Test |u| stays within the unit disc"""
        for eta in (0.5, 4.0):
            _, u, _ = solved_waveguide(eta)
            self.assertLessEqual(np.max(u.magnitude), 1.0 + app_settings.BOUNDSTATE_SOLVER_EPS)

    def test_second_order(self):
        """Test halving dt cuts the error against a fine reference by about four"""
        reference = solve_u(create_problem(1.0, horizon=5.0, dt=0.0025))
        errors = []
        for dt in (0.02, 0.01):
            u = solve_u(create_problem(1.0, horizon=5.0, dt=dt))
            stride = int(round(dt / 0.0025))
            errors.append(np.max(np.abs(u.samples - reference.samples[::stride])))

        ratio = errors[0] / errors[1]
        self.assertGreater(ratio, 3.0)
        self.assertLess(ratio, 5.0)

    def test_rotating_frame_is_exact(self):
        """Test the solution does not depend on where the band sits"""
        _, centred, _ = solved_waveguide(1.0, horizon=5.0, dt=0.01)
        shifted = solve_u(create_problem(1.0, horizon=5.0, dt=0.01, omega0=7.0))
        np.testing.assert_allclose(shifted.samples * np.exp(7j * shifted.times), centred.samples, atol=1e-8)

    def test_born_markov_decay(self):
        """Test weak coupling decays at eta^2 xi0 without frequency shift"""
        problem, u, _ = solved_waveguide(0.2, horizon=40.0, dt=1e-2)
        rate, shift = fit_markov_parameters(u, problem.omega_c, 5.0, 40.0)
        self.assertLess(abs(rate - 0.04) / 0.04, 0.05)
        self.assertLess(abs(shift), 0.05 * 0.04)

    def test_strong_coupling_envelope(self):
        """Test eta=4 settles into a cosine envelope with amplitude A and frequency omega(eta)"""
        _, u, _ = solved_waveguide(4.0)
        amplitude, frequency = steady_envelope(4.0)
        times, heights = oscillation_peaks(u, 10.0)

        self.assertGreater(len(heights), 5)
        np.testing.assert_allclose(heights, 14 / 15, rtol=0.02)
        self.assertAlmostEqual(amplitude, 14 / 15, places=12)
        period = np.mean(np.diff(times))
        self.assertLess(abs(period - math.pi / frequency) / (math.pi / frequency), 0.01)
        self.assertAlmostEqual(math.pi / frequency, math.pi * math.sqrt(15) / 16, places=12)

    def test_divergence_detected(self):
        """Test a growing solution raises with the first bad step"""
        problem = create_problem(1.0, horizon=5.0, dt=0.01)
        with patch("boundstate.greenfn.tabulate_g", return_value=-np.ones(problem.grid.n + 1, dtype=complex)):
            with self.assertRaises(SolverInstabilityError) as cm:
                solve_u(problem)
        self.assertGreater(cm.exception.details["step"], 0)
        self.assertGreater(cm.exception.details["magnitude"], 1.0)


class TestDerivatives(TestCase):
    def test_udot_at_start(self):
        """Test udot(0) = -i omega_c"""
        problem = create_problem(1.0, horizon=1.0, dt=0.01, omega0=2.0, omega_c=2.5)
        u = solve_u(problem)
        self.assertEqual(udot(problem, u, 0), -2.5j)

    def test_udot_free(self):
        """Test udot of free evolution"""
        problem = create_problem(0.0, horizon=1.0, dt=0.01, omega_c=2.0)
        u = solve_u(problem)
        np.testing.assert_allclose(udot_series(problem, u), -2j * np.exp(-2j * u.times), atol=1e-13)

    def test_udot_matches_series(self):
        """Test pointwise and vectorised derivatives agree"""
        _, u, _ = solved_waveguide(1.0, horizon=5.0, dt=0.01)
        problem = create_problem(1.0, horizon=5.0, dt=0.01)
        series = udot_series(problem, u)
        for k in (1, 17, 250, 500):
            self.assertAlmostEqual(abs(series[k] - udot(problem, u, k)), 0.0, places=12)

    def test_udot_matches_difference(self):
        """Test the exact identity agrees with a centred difference of u"""
        problem, u, _ = solved_waveguide(1.0, horizon=5.0, dt=0.01)
        series = udot_series(problem, u)
        difference = (u.samples[2:] - u.samples[:-2]) / (2 * problem.grid.dt)
        self.assertLess(np.max(np.abs(series[1:-1] - difference)), 1e-3)

    def test_vdot_zero_temperature(self):
        """Test vdot vanishes at zero temperature"""
        problem = create_problem(1.0, horizon=1.0, dt=0.01)
        u = solve_u(problem)
        self.assertEqual(vdot(problem, u, 50), 0.0)


class TestSolveV(TestCase):
    def test_zero_temperature(self):
        """Test v vanishes identically at zero temperature"""
        _, _, v = solved_waveguide(4.0)
        self.assertTrue(np.all(v.samples == 0.0))

    def test_starts_at_zero(self):
        """Test v(0) = 0"""
        _, _, v = solved_waveguide(0.2, horizon=62.5, dt=1e-2, omega0=10.0, nbar=0.5)
        self.assertEqual(v.samples[0], 0.0)

    def test_non_negative(self):
        """Test v stays non-negative"""
        _, _, v = solved_waveguide(0.2, horizon=62.5, dt=1e-2, omega0=10.0, nbar=0.5)
        self.assertGreaterEqual(np.min(v.samples), -app_settings.BOUNDSTATE_SOLVER_EPS)

    def test_thermal_saturation(self):
        """Test weak coupling saturates v at the band-centre occupation by t = 5/(2 eta^2 xi0)"""
        problem, _, v = solved_waveguide(0.2, horizon=62.5, dt=1e-2, omega0=10.0, nbar=0.5)
        self.assertAlmostEqual(problem.grid.horizon, 5 / (2 * 0.04))
        self.assertLess(abs(v.samples[-1] - 0.5) / 0.5, 0.02)

        normalized = normalized_fluctuation(v, problem.bath, 10.0)
        self.assertLess(abs(normalized[-1] - 1.0), 0.02)

    def test_vdot_matches_difference(self):
        """Test the vdot identity against a centred difference of v"""
        problem, u, v = solved_waveguide(0.2, horizon=62.5, dt=1e-2, omega0=10.0, nbar=0.5)
        dt = problem.grid.dt
        for k in (100, 1000, 5000):
            difference = (v.samples[k + 1] - v.samples[k - 1]) / (2 * dt)
            self.assertAlmostEqual(vdot(problem, u, k), difference, delta=1e-4)

    def test_grid_mismatch(self):
        """Test u must come from the same grid"""
        problem = create_problem(1.0, horizon=1.0, dt=0.01, omega0=10.0, nbar=0.5)
        other = solve_u(create_problem(1.0, horizon=2.0, dt=0.01, omega0=10.0))
        with self.assertRaises(ValueError):
            solve_v(problem, other)

    def test_normalized_fluctuation_cold(self):
        """Test normalization is undefined without thermal occupation"""
        _, _, v = solved_waveguide(4.0)
        with self.assertRaises(ValueError):
            normalized_fluctuation(v, BathSpec(0.0), 1.0)


class TestLateTimeSummary(TestCase):
    def test_strong_coupling_summary(self):
        """Test the summary reports the envelope peaks and period"""
        problem, u, v = solved_waveguide(4.0)
        summary = late_time_summary(u, v, problem)

        self.assertLess(abs(summary["peak_abs_u_mean"] - 14 / 15), 0.02)
        self.assertLess(abs(summary["oscillation_period"] - math.pi * math.sqrt(15) / 16), 0.01)
        self.assertIsNone(summary["v_end_normalized"])

    def test_thermal_summary(self):
        """Test the summary normalizes v by the occupation"""
        problem, u, v = solved_waveguide(0.2, horizon=62.5, dt=1e-2, omega0=10.0, nbar=0.5)
        summary = late_time_summary(u, v, problem)

        self.assertAlmostEqual(summary["v_end"], v.samples[-1])
        self.assertLess(abs(summary["v_end_normalized"] - 1.0), 0.02)
        self.assertLess(abs(summary["fitted_rate"] - 0.04) / 0.04, 0.05)

    def test_problem_validation(self):
        """Test non-finite cavity frequencies are rejected"""
        with self.assertRaises(ValueError):
            EvolutionProblem(math.inf, create_waveguide(1.0), BathSpec(), TimeGrid(0.1, 10))
