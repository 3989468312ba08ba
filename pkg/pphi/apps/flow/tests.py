import math

import numpy as np

from ...stats import Estimate, mean_estimate
from ...test import PPhiTestCase
from ..gff.models import ScaleGrid
from ..gff.sampling import default_grid, sample_gff_batch, sample_scale_path, spectral_variance_of
from ..lattice.models import INFINITE_SCALE, RealField
from ..wick.models import WickPolynomial
from ..wick.potential import grad_v0_cut, v0_values
from .diagnostics import (
    DifferenceRecord,
    DifferenceReport,
    difference_diagnostics,
    drift_integrability,
    independence_statistic,
    max_comparison,
)
from .estimator import estimate_gradient, grad_v_t_estimate
from .exceptions import DegenerateWeightsError, EmptySampleError, FlowConfigError
from .gaussian import (
    quadratic_gradient,
    quadratic_log_laplace,
    quadratic_mode_variance,
    quadratic_scheme_variance,
)
from .integrator import default_cutoff_e, integrate_backward, run_flow, terminal_fields
from .models import CouplingSample, FlowConfig

QUARTIC = (0.0, 0.5, 0.0, 0.1)


class FlowTestCase(PPhiTestCase):
    def config(self, geometry, coeffs=QUARTIC, cutoff_e=1e6, grid=None, mc_inner=32, seed=1, **kwargs):
        if grid is None:
            grid = ScaleGrid.geometric(0.5, 20.0, 0.01)
        polynomial = WickPolynomial.for_geometry(coeffs, geometry, cutoff_e)
        return FlowConfig(geometry, polynomial, grid, mc_inner, seed, **kwargs)


class FlowConfigTest(FlowTestCase):
    """Tests for flow configuration and coupling samples."""

    def test_validation(self):
        geometry = self.geometry(n=4)
        with self.assertRaises(FlowConfigError):
            self.config(geometry, mc_inner=1)
        with self.assertRaises(FlowConfigError):
            self.config(geometry, cutoff_e="inf").require_finite_cutoff()
        self.config(geometry, coeffs=(), cutoff_e="inf").require_finite_cutoff()

    def test_coupling_identity(self):
        geometry = self.geometry(n=4)
        grid = ScaleGrid((INFINITE_SCALE, 1.0, 0.0))
        zero = RealField.zeros(geometry)
        gff = (zero, self.random_field(geometry, 1), self.random_field(geometry, 2))
        delta = (zero, self.random_field(geometry, 3), self.random_field(geometry, 4))
        phi_p = tuple(d + g for d, g in zip(delta, gff))

        sample = CouplingSample(grid, phi_p, gff, delta)
        self.assertFieldsClose(phi_p[1], sample.at(1.0)[0])
        self.assertEqual(geometry, sample.geometry)

        broken = phi_p[:2] + (phi_p[2] + RealField.constant(geometry, 1e-9),)
        with self.assertRaises(FlowConfigError):
            CouplingSample(grid, broken, gff, delta)
        with self.assertRaises(FlowConfigError):
            CouplingSample(grid, (gff[1],) + phi_p[1:], gff, delta)


class EstimatorTest(FlowTestCase):
    """Tests for the Monte-Carlo gradient of v_t."""

    def test_zero_polynomial(self):
        geometry = self.geometry(n=8)
        cfg = self.config(geometry, coeffs=())
        phi = self.random_field(geometry, 3)
        np.testing.assert_array_equal(np.zeros(geometry.shape), grad_v_t_estimate(phi, 0.5, cfg, 9).values)

    def test_small_scale_limit(self):
        geometry = self.geometry(n=8)
        cfg = self.config(geometry, cutoff_e="inf", mc_inner=16)
        phi = self.random_field(geometry, 3)
        estimate = grad_v_t_estimate(phi, 1e-13, cfg, 9)
        self.assertFieldsClose(grad_v0_cut(phi, cfg.polynomial), estimate, atol=1e-4)

    def test_quadratic_closed_form(self):
        geometry = self.geometry(n=8)
        a2 = 0.5
        cfg = self.config(geometry, coeffs=(0.0, a2), cutoff_e="inf", mc_inner=10_000)
        phi = self.random_field(geometry, 11)
        for t in (0.5, INFINITE_SCALE):
            estimate = estimate_gradient(phi, t, cfg, 12)
            self.assertWithinStandardErrors(
                quadratic_gradient(phi, a2, t).values.ravel(),
                estimate.gradient.values.ravel(),
                estimate.stderr.ravel(),
            )
            self.assertGreater(estimate.ess, 1000)

    def test_determinism(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry, cutoff_e="inf", mc_inner=100)
        phi = self.random_field(geometry, 5)
        first = estimate_gradient(phi, 0.3, cfg, 77)
        np.testing.assert_array_equal(first.gradient.values, estimate_gradient(phi, 0.3, cfg, 77).gradient.values)
        self.assertFalse(np.array_equal(first.gradient.values, grad_v_t_estimate(phi, 0.3, cfg, 78).values))

        chunked = estimate_gradient(phi, 0.3, cfg, 77, chunk=7)
        np.testing.assert_allclose(first.gradient.values, chunked.gradient.values, rtol=1e-10, atol=1e-12)
        self.assertAlmostEqual(first.potential, chunked.potential, places=10)

    def test_degenerate_weights(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry, coeffs=(0.0, 0.0, 0.0, 1e4), cutoff_e="inf", mc_inner=64)
        with self.assertRaises(DegenerateWeightsError) as context:
            grad_v_t_estimate(RealField.zeros(geometry), INFINITE_SCALE, cfg, 3)
        self.assertLess(context.exception.ess, 2)


class IntegratorTest(FlowTestCase):
    """Tests for the backward Euler flow."""

    def test_zero_polynomial(self):
        geometry = self.geometry(n=8)
        cfg = self.config(geometry, coeffs=(), cutoff_e="inf")
        path = sample_scale_path(geometry, cfg.grid, 4, replica=2)
        sample = integrate_backward(cfg, path)

        self.assertEqual(2, sample.replica)
        for phi_p, phi_gff, phi_delta in zip(sample.phi_p, sample.phi_gff, sample.phi_delta):
            np.testing.assert_array_equal(phi_gff.values, phi_p.values)
            np.testing.assert_array_equal(np.zeros(geometry.shape), phi_delta.values)

    def test_quartic_run(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry)
        samples = run_flow(cfg, 4, workers=1)

        self.assertEqual([0, 1, 2, 3], [s.replica for s in samples])
        self.assertEqual(cfg.grid.intervals, len(samples[0].gradients))
        self.assertGreater(np.abs(samples[0].terminal_difference.values).max(), 0.0)

        threaded = run_flow(cfg, 4, workers=3)
        for expected, actual in zip(samples, threaded):
            np.testing.assert_array_equal(expected.terminal.values, actual.terminal.values)
        np.testing.assert_array_equal(samples[3].terminal.values, terminal_fields(cfg, 1, start=3)[0])

    def test_common_random_numbers(self):
        geometry = self.geometry(n=4)
        fresh = run_flow(self.config(geometry), 1)[0]
        common = run_flow(self.config(geometry, common_random_numbers=True), 1)[0]
        np.testing.assert_array_equal(fresh.terminal_gff.values, common.terminal_gff.values)
        self.assertFalse(np.array_equal(fresh.terminal.values, common.terminal.values))

    def test_rejects_bad_input(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry)
        with self.assertRaises(FlowConfigError):
            integrate_backward(cfg, sample_scale_path(geometry, ScaleGrid.geometric(0.5, 4.0, 0.1), 1))
        with self.assertRaises(FlowConfigError):
            integrate_backward(self.config(geometry, cutoff_e="inf"), sample_scale_path(geometry, cfg.grid, 1))

    def test_quadratic_mode_variances(self):
        geometry = self.geometry(n=8)
        a2 = 0.5
        grid = ScaleGrid.geometric(0.5, 100.0, 1e-3)
        cfg = self.config(geometry, coeffs=(0.0, a2), cutoff_e=1e12, grid=grid, mc_inner=32, seed=8)
        fields = terminal_fields(cfg, 2000)

        power = np.abs(np.fft.fft2(fields, axes=(-2, -1)) / geometry.sites) ** 2
        np.testing.assert_allclose(power.mean(axis=0), spectral_variance_of(fields))
        mean, stderr = mean_estimate(power)
        self.assertWithinStandardErrors(
            quadratic_scheme_variance(geometry, a2, grid).ravel(),
            mean.ravel(),
            stderr.ravel(),
            relative_allowance=0.03,
        )

    def test_quadratic_exact_variances(self):
        geometry = self.geometry(n=4)
        a2 = 0.5
        grid = default_grid(geometry, rho=0.9)
        cfg = self.config(geometry, coeffs=(0.0, a2), cutoff_e=1e12, grid=grid, mc_inner=32, seed=9)
        exact = quadratic_mode_variance(geometry, a2).ravel()
        self.assertLess(np.abs(quadratic_scheme_variance(geometry, a2, grid).ravel() / exact - 1.0).max(), 0.03)

        mean, stderr = mean_estimate(np.abs(np.fft.fft2(terminal_fields(cfg, 1000), axes=(-2, -1)) / 16) ** 2)
        self.assertWithinStandardErrors(exact, mean.ravel(), stderr.ravel(), relative_allowance=0.03)

    def test_scheme_refinement(self):
        geometry = self.geometry(n=4)
        coarse = self.config(geometry, grid=default_grid(geometry, rho=0.81), mc_inner=16, seed=13)
        fine = self.config(geometry, grid=default_grid(geometry, rho=0.9), mc_inner=16, seed=14)
        self.assertGreater(fine.grid.intervals, coarse.grid.intervals)

        # ρ → √ρ moves E⟨Φ₀^P, Φ₀^P⟩ by less than the statistical error
        squares = [np.mean(terminal_fields(cfg, 200) ** 2, axis=(-2, -1)) for cfg in (coarse, fine)]
        self.assertWithinStandardErrors(0.0, mean_estimate(squares[0]) - mean_estimate(squares[1]))

    def test_default_cutoff(self):
        geometry = self.geometry(n=8)
        polynomial = WickPolynomial.for_geometry(QUARTIC, geometry)
        cutoff = default_cutoff_e(geometry, polynomial, 5, pilot=500)
        self.assertEqual(cutoff, default_cutoff_e(geometry, polynomial, 5, pilot=500))
        self.assertGreaterEqual(cutoff, 10.0)

        samples = sample_gff_batch(geometry, 6, 500)
        self.assertLess(np.mean(v0_values(samples, polynomial) > cutoff / 2), 0.01)
        self.assertEqual(10.0, default_cutoff_e(geometry, WickPolynomial(()), 5, pilot=10))


class GaussianTest(FlowTestCase):
    """Tests for the quadratic closed forms."""

    def test_scheme_converges(self):
        geometry = self.geometry(n=8)
        a2 = 0.5
        exact = quadratic_mode_variance(geometry, a2)

        fine = quadratic_scheme_variance(geometry, a2, default_grid(geometry, rho=0.97))
        np.testing.assert_allclose(fine, exact, rtol=0.03)

        coarse = quadratic_scheme_variance(geometry, a2, default_grid(geometry, rho=0.7))
        self.assertLess(np.abs(fine - exact).max(), np.abs(coarse - exact).max())

        biases = [
            np.abs(quadratic_scheme_variance(geometry, a2, default_grid(geometry, rho=rho)) / exact - 1.0).max()
            for rho in (0.5, 0.7, 0.9)
        ]
        self.assertEqual(sorted(biases, reverse=True), biases)
        self.assertLess(biases[-1], 0.015)

    def test_zero_interaction(self):
        geometry = self.geometry(n=8)
        self.assertEqual(0.0, quadratic_log_laplace(geometry, 0.0))
        grid = default_grid(geometry, rho=0.7)
        np.testing.assert_allclose(
            quadratic_scheme_variance(geometry, 0.0, grid), quadratic_mode_variance(geometry, 0.0)
        )

    def test_log_laplace(self):
        geometry = self.geometry(n=8)
        a2 = 0.5
        polynomial = WickPolynomial.for_geometry((0.0, a2), geometry)
        weights = np.exp(-v0_values(sample_gff_batch(geometry, 31, 20_000), polynomial))
        estimate = mean_estimate(weights)
        self.assertWithinStandardErrors(
            quadratic_log_laplace(geometry, a2), -math.log(estimate.value), estimate.stderr / estimate.value
        )


class DiagnosticsTest(FlowTestCase):
    """Tests for difference-field and coupling diagnostics."""

    def test_zero_polynomial(self):
        geometry = self.geometry(n=4)
        samples = run_flow(self.config(geometry, coeffs=(), cutoff_e="inf"), 5)
        report = difference_diagnostics(samples, alphas=(0.0, 1.0), moment_exponents=(2.0, 0.5))

        self.assertEqual(2 * 2 * len(samples[0].grid.times), len(report.records))
        for record in report.records:
            self.assertEqual(0.0, record.moment.value)
            self.assertEqual(0.0, record.continuity.value)
        self.assertEqual(0.0, drift_integrability(samples).value)
        self.assertEqual(0, max_comparison(samples).violations)
        self.assertEqual(5, report.as_json()["replicas"])

    def test_quartic(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry, mc_inner=24)
        samples = run_flow(cfg, 40)
        report = difference_diagnostics(samples, alphas=(1.0,), moment_exponents=(2.0,), resamples=200)

        times, moments, errors = report.curve(1.0, 2.0)
        self.assertEqual(list(cfg.grid.times), list(times))
        self.assertEqual(0.0, moments[0])
        self.assertGreater(moments[-1], 0.0)
        self.assertTrue(np.all(errors >= 0))
        _, continuity, _ = report.curve(1.0, 2.0, continuity=True)
        self.assertEqual(0.0, continuity[-1])
        self.assertAlmostEqual(moments[-1], continuity[0])

        comparison = max_comparison(samples)
        self.assertEqual(0, comparison.violations)
        self.assertTrue(np.all(comparison.bounds > 0))
        self.assertGreater(drift_integrability(samples).value, 0.0)

    def test_epsilon_sweep(self):
        reports, actions = [], []
        for n in (4, 8):
            geometry = self.geometry(n=n)
            cfg = self.config(geometry, grid=default_grid(geometry, rho=0.7), mc_inner=16, seed=30 + n)
            samples = run_flow(cfg, 200)
            reports.append(difference_diagnostics(samples, alphas=(1.0,), moment_exponents=(1.0, 2.0), seed=n))
            actions.append(drift_integrability(samples).value)

        # H¹ second moments and the drift action stay within a factor 2 across ε
        for pick in (np.max, lambda curve: curve[-1]):
            values = [pick(report.curve(1.0, 2.0)[1]) for report in reports]
            self.assertLess(max(values) / min(values), 2.0)
        self.assertLess(max(actions) / min(actions), 2.0)
        for report in reports:
            self.assertTrue(report.continuity_decreasing(1.0, 1.0))
            self.assertTrue(report.continuity_decreasing(1.0, 2.0))

    def test_continuity_trend(self):
        geometry = self.geometry(n=4)
        samples = run_flow(self.config(geometry, coeffs=(), cutoff_e="inf"), 3)
        zero = difference_diagnostics(samples, alphas=(1.0,), moment_exponents=(2.0,))
        self.assertTrue(zero.continuity_decreasing(1.0, 2.0))

        def record(time, value, stderr):
            estimate = Estimate(value, stderr)
            return DifferenceRecord(time=time, alpha=1.0, exponent=2.0, moment=estimate, continuity=estimate)

        times = (math.inf, 1.0, 0.5, 0.25, 0.1, 0.0)
        falling = DifferenceReport(tuple(record(t, v, 0.01) for t, v in zip(times, (9, 4, 3, 2, 1, 0))), 10)
        self.assertTrue(falling.continuity_decreasing(1.0, 2.0))
        # only the three smallest positive times count
        early_bump = DifferenceReport(tuple(record(t, v, 0.01) for t, v in zip(times, (0, 4, 3, 2, 1, 0))), 10)
        self.assertTrue(early_bump.continuity_decreasing(1.0, 2.0))
        late_bump = DifferenceReport(tuple(record(t, v, 0.01) for t, v in zip(times, (9, 4, 1, 2, 1, 0))), 10)
        self.assertFalse(late_bump.continuity_decreasing(1.0, 2.0))
        noisy = DifferenceReport(tuple(record(t, v, 0.5) for t, v in zip(times, (9, 4, 1, 2, 1, 0))), 10)
        self.assertTrue(noisy.continuity_decreasing(1.0, 2.0))


    def test_independence(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry, mc_inner=16, seed=21)
        samples = run_flow(cfg, 400)
        for t in (cfg.grid.interior[2], cfg.grid.interior[5]):
            self.assertWithinStandardErrors(0.0, independence_statistic(samples, t), comparisons=2)

    def test_empty(self):
        with self.assertRaises(EmptySampleError):
            difference_diagnostics([], alphas=(1.0,), moment_exponents=(2.0,))
        with self.assertRaises(EmptySampleError):
            independence_statistic([], 1.0)
