import math
from unittest.mock import patch

import numpy as np
from scipy import integrate

from ...stats import bonferroni_multiplier, mean_estimate
from ...test import PPhiTestCase
from ..flow.gaussian import quadratic_log_laplace
from ..flow.models import FlowConfig
from ..gff.models import ScaleGrid
from ..gff.sampling import default_grid, sample_gff_batch
from ..lattice.models import INFINITE_SCALE, RealField
from ..lattice.spectral import mass_symbol
from ..norms.spaces import sobolev_norm
from ..wick.models import WickPolynomial
from ..wick.potential import v0_cut_values
from .drift import integrated_drift, integrated_drift_constant, interval_q_integral
from .exceptions import DivergenceError, DriftGridError, OptimizerConfigError
from .models import BdReport, DriftPath, SgdConfig
from .objective import bd_objective, feedback_objective, reference_log_laplace
from .optimizer import minimize_open_loop

QUARTIC = (0.0, 0.5, 0.0, 0.1)
SHORT_GRID = ScaleGrid.geometric(0.5, 4.0, 0.01)


class VariationalTestCase(PPhiTestCase):
    def config(self, geometry, coeffs=QUARTIC, cutoff_e=1e6, grid=SHORT_GRID, mc_inner=32, seed=3):
        polynomial = WickPolynomial.for_geometry(coeffs, geometry, cutoff_e)
        return FlowConfig(geometry, polynomial, grid, mc_inner, seed)

    def random_drift(self, geometry, grid=SHORT_GRID, seed=0, scale=0.5) -> DriftPath:
        rng = np.random.default_rng(seed)
        values = scale * rng.standard_normal((len(grid.interior),) + geometry.shape)
        return DriftPath.from_array(grid, geometry, values)

    def assertNotBelow(self, bound, estimate, comparisons=1):  # pylint: disable=invalid-name
        self.assertGreaterEqual(estimate.value - bound, -bonferroni_multiplier(comparisons) * estimate.stderr)


class DriftPathTest(VariationalTestCase):
    """Tests for piecewise-constant drifts."""

    def test_action(self):
        geometry = self.geometry(n=4)
        grid = ScaleGrid((INFINITE_SCALE, 3.0, 1.0, 0.0))
        u = DriftPath(grid, (RealField.constant(geometry, 2.0), RealField.constant(geometry, -1.0)))

        np.testing.assert_array_equal([2.0, 1.0], u.durations)
        self.assertAlmostEqual(4.0 * 2.0 + 1.0 * 1.0, u.action())
        self.assertEqual(0.0, DriftPath.zeros(grid, geometry).action())
        self.assertAlmostEqual(4.0 * u.action(), (u + u).action())
        self.assertAlmostEqual(9.0 * u.action(), (3 * u).action())

    def test_validation(self):
        geometry = self.geometry(n=4)
        grid = ScaleGrid((INFINITE_SCALE, 3.0, 1.0, 0.0))
        with self.assertRaises(DriftGridError):
            DriftPath(grid, (RealField.zeros(geometry),))
        with self.assertRaises(DriftGridError):
            DriftPath(grid, (RealField.zeros(geometry), RealField.zeros(self.geometry(n=8))))
        with self.assertRaises(DriftGridError):
            DriftPath.zeros(grid, geometry) + DriftPath.zeros(SHORT_GRID, geometry)

    def test_sgd_config(self):
        self.assertEqual(40, SgdConfig(steps=5, rate=0.5, batch=10).evaluation_batch)
        for kwargs in ({"steps": 0}, {"rate": 0.0}, {"rate": 1.5}, {"batch": 1}):
            arguments = {"steps": 5, "rate": 0.5, "batch": 10, **kwargs}
            with self.assertRaises(OptimizerConfigError):
                SgdConfig(**arguments)


class IntegratedDriftTest(VariationalTestCase):
    """Tests for the integrated drift."""

    def test_zero_drift(self):
        geometry = self.geometry(n=8)
        result = integrated_drift(DriftPath.zeros(SHORT_GRID, geometry))
        np.testing.assert_array_equal(np.zeros(geometry.shape), result.values)

    def test_quadrature(self):
        geometry = self.geometry(n=8)
        a = mass_symbol(geometry)
        for s, t in ((0.25, 0.5), (1.0, 3.0)):
            times = np.linspace(s, t, 10_001)
            integrand = 1.0 / (times[:, np.newaxis, np.newaxis] * a + 1.0)
            expected = integrate.simpson(integrand, x=times, axis=0)
            np.testing.assert_allclose(expected, interval_q_integral(geometry, s, t), rtol=1e-8)

        grid = ScaleGrid((INFINITE_SCALE, 0.5, 0.25, 0.0))
        u = DriftPath(grid, (RealField.constant(geometry, 1.5), RealField.zeros(geometry)))
        constant = 1.5 * math.log((0.5 * geometry.mass2 + 1) / (0.25 * geometry.mass2 + 1)) / geometry.mass2
        self.assertFieldsClose(RealField.constant(geometry, constant), integrated_drift(u), atol=1e-14)

        with self.assertRaises(DriftGridError):
            interval_q_integral(geometry, 1.0, INFINITE_SCALE)
        with self.assertRaises(DriftGridError):
            interval_q_integral(geometry, 2.0, 1.0)

    def test_additivity_and_linearity(self):
        geometry = self.geometry(n=8)
        u = self.random_drift(geometry, seed=1)
        v = self.random_drift(geometry, seed=2)
        times = SHORT_GRID.interior

        for middle in (times[0], times[3], times[-1]):
            self.assertFieldsClose(
                integrated_drift(u), integrated_drift(u, 0.0, middle) + integrated_drift(u, middle), atol=1e-13
            )
        self.assertFieldsClose(
            integrated_drift(u, times[5], times[1]),
            integrated_drift(u, times[5], times[3]) + integrated_drift(u, times[3], times[1]),
            atol=1e-13,
        )
        self.assertFieldsClose(integrated_drift(u, times[0]), integrated_drift(u, times[0], INFINITE_SCALE))
        np.testing.assert_array_equal(np.zeros(geometry.shape), integrated_drift(u, times[2], times[2]).values)

        combined = integrated_drift(2.0 * u + v)
        self.assertFieldsClose(integrated_drift(u) * 2.0 + integrated_drift(v), combined, atol=1e-13)

        with self.assertRaises(DriftGridError):
            integrated_drift(u, times[1], times[2])


class SobolevBoundTest(VariationalTestCase):
    """Tests for Sobolev bounds of integrated drifts at small and large scales."""

    @staticmethod
    def restricted(u: DriftPath, low: int, high: int) -> DriftPath:
        values = np.zeros_like(u.as_array())
        values[low:high] = u.as_array()[low:high]
        return DriftPath.from_array(u.grid, u.geometry, values)

    def test_small_scales(self):
        for n in (8, 16, 32):
            geometry = self.geometry(n=n)
            for seed in range(3):
                u = self.random_drift(geometry, seed=seed)
                for j, t in enumerate(SHORT_GRID.interior[:-1], start=1):
                    # fields j-1 onwards live below t
                    below = self.restricted(u, j - 1, len(u.fields))
                    for alpha in (0.0, 0.5, 1.0):
                        constant = integrated_drift_constant(geometry, alpha, 0.0, t)
                        self.assertLessEqual(constant / t ** (1.0 - alpha), 2.5)
                        norm = sobolev_norm(integrated_drift(below, 0.0, t), alpha) ** 2
                        self.assertLessEqual(norm, constant * below.action() * (1 + 1e-10))

    def test_large_scales(self):
        for n in (8, 16, 32):
            geometry = self.geometry(n=n)
            u = self.random_drift(geometry, seed=n)
            for j, t in enumerate(SHORT_GRID.interior[1:], start=2):
                above = self.restricted(u, 0, j - 1)
                for alpha in (1.5, 2.0):
                    constant = integrated_drift_constant(geometry, alpha, t, INFINITE_SCALE)
                    self.assertLessEqual(constant / t ** (1.0 - alpha), 6.2)
                    norm = sobolev_norm(integrated_drift(above, t), alpha) ** 2
                    self.assertLessEqual(norm, constant * above.action() * (1 + 1e-10))


class ObjectiveTest(VariationalTestCase):
    """Tests for the variational functional and its reference value."""

    def test_zero_drift(self):
        geometry = self.geometry(n=8)
        cfg = self.config(geometry)
        objective = bd_objective(DriftPath.zeros(SHORT_GRID, geometry), cfg, 4000, seed=1)
        direct = mean_estimate(v0_cut_values(sample_gff_batch(geometry, 99, 4000), cfg.polynomial))
        self.assertWithinStandardErrors(0.0, objective - direct)

    def test_zero_polynomial(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry, coeffs=(), cutoff_e="inf")
        u = self.random_drift(geometry)
        objective = bd_objective(u, cfg, 10, seed=1)
        self.assertAlmostEqual(0.5 * u.action(), objective.value)
        self.assertEqual(0.0, objective.stderr)
        self.assertAlmostEqual(0.0, reference_log_laplace(cfg, 10, seed=1).value)

        report = feedback_objective(cfg, 4, seed=2)
        self.assertEqual(0.0, report.f_value.value)
        self.assertAlmostEqual(0.0, report.gap.value)

    def test_quadratic_reference(self):
        geometry = self.geometry(n=8)
        a2 = 0.5
        cfg = self.config(geometry, coeffs=(0.0, a2), cutoff_e="inf")
        reference = reference_log_laplace(cfg, 20_000, seed=4, resamples=300)
        self.assertWithinStandardErrors(quadratic_log_laplace(geometry, a2), reference)

    def test_upper_bound(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry)
        reference = reference_log_laplace(cfg, 20_000, seed=5, resamples=300)
        for seed in range(20):
            u = self.random_drift(geometry, seed=seed, scale=0.3)
            gap = bd_objective(u, cfg, 1000, seed=100 + seed) - reference
            self.assertNotBelow(0.0, gap, comparisons=20)

    def test_quadratic_feedback(self):
        geometry = self.geometry(n=8)
        a2 = 0.5
        cfg = self.config(geometry, coeffs=(0.0, a2), cutoff_e=1e12, grid=default_grid(geometry, rho=0.7), mc_inner=64)
        report = feedback_objective(cfg, 500, seed=6, reference_batch=20_000)

        exact = quadratic_log_laplace(geometry, a2)
        self.assertWithinStandardErrors(exact, report.reference_log_laplace)
        self.assertNotBelow(0.0, report.gap)
        self.assertLessEqual(abs(report.gap.value), 0.05 * abs(exact) + 3.0 * report.gap.stderr)
        self.assertGreater(report.action, 0.0)


class OptimizerTest(VariationalTestCase):
    """Tests for open-loop stochastic-gradient descent."""

    def test_zero_polynomial(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry, coeffs=(), cutoff_e="inf")
        drift, report = minimize_open_loop(cfg, SgdConfig(steps=10, rate=0.5, batch=8), seed=1)
        self.assertLessEqual(drift.action(), 1e-6)
        self.assertEqual(0.0, report.f_value.value)
        self.assertEqual(10, len(report.trace))
        self.assertTrue(report.trace_monotone)

    def test_quadratic(self):
        geometry = self.geometry(n=8)
        a2 = 0.5
        cfg = self.config(geometry, coeffs=(0.0, a2), cutoff_e="inf")
        initial = self.random_drift(geometry, seed=3, scale=1.0)
        drift, report = minimize_open_loop(
            cfg, SgdConfig(steps=40, rate=0.5, batch=256, final_batch=4000), seed=2, initial=initial
        )

        self.assertLess(drift.action(), 1e-2)
        self.assertLess(report.trace[-1], report.trace[0])
        self.assertTrue(report.trace_monotone)
        self.assertEqual(40, len(report.trace_stderr))
        smooth, errors = report.smoothed_trace()
        self.assertEqual(36, len(smooth))
        self.assertTrue(np.all(errors > 0))
        self.assertNotBelow(quadratic_log_laplace(geometry, a2), report.f_value)
        self.assertWithinStandardErrors(0.0, report.f_value)
        self.assertNotBelow(0.0, report.gap)

    def test_trace_monotone(self):
        zero = mean_estimate([0.0, 0.0])
        falling = BdReport(zero, zero, trace=tuple(np.linspace(5.0, 1.0, 20)), trace_stderr=(0.01,) * 20)
        self.assertTrue(falling.trace_monotone)

        # a rise well inside the batch error still counts as monotone
        noisy = list(np.linspace(5.0, 1.0, 20))
        noisy[12] += 1.5
        self.assertTrue(BdReport(zero, zero, trace=tuple(noisy), trace_stderr=(0.5,) * 20).trace_monotone)
        self.assertFalse(BdReport(zero, zero, trace=tuple(noisy), trace_stderr=(0.01,) * 20).trace_monotone)

        rising = BdReport(zero, zero, trace=tuple(np.linspace(1.0, 5.0, 20)), trace_stderr=(0.01,) * 20)
        self.assertFalse(rising.trace_monotone)
        self.assertFalse(rising.as_json()["trace_monotone"])
        self.assertIsNone(BdReport(zero, zero).trace_monotone)

    def test_quartic_against_feedback(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry, grid=default_grid(geometry, rho=0.7), mc_inner=64)
        _, open_loop = minimize_open_loop(cfg, SgdConfig(steps=30, rate=0.5, batch=128, final_batch=4000), seed=7)
        feedback = feedback_objective(cfg, 300, seed=8)
        self.assertNotBelow(0.0, open_loop.f_value - feedback.f_value)

    def test_divergence(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry)
        gradient = np.zeros((4,) + geometry.shape)
        values = [(np.zeros(4), gradient), (np.full(4, 1e3), gradient)]
        with patch("pphi.apps.variational.optimizer.v0_cut_and_grad_values", side_effect=values):
            with self.assertRaises(DivergenceError) as context:
                minimize_open_loop(cfg, SgdConfig(steps=5, rate=0.5, batch=4), seed=1)
        self.assertEqual(1, context.exception.step)
