import math

import numpy as np
from scipy import stats

from ...test import PPhiTestCase
from ..flow.gaussian import quadratic_mode_variance
from ..lattice.models import INFINITE_SCALE, RealField
from ..lattice.spectral import apply_multiplier, mass_symbol, pv_covariance_symbol
from ..wick.models import WickPolynomial
from .exceptions import McmcConfigError, ZeroAcceptanceError
from .models import McmcConfig
from .sampler import effective_sample_size, log_target_and_grad, mala_chain, pooled_estimate, run_chains

QUARTIC = (0.0, 0.5, 0.0, 0.1)


class McmcTestCase(PPhiTestCase):
    def config(self, geometry, coeffs=QUARTIC, cutoff_e=1e6, **kwargs):
        return McmcConfig(geometry, WickPolynomial.for_geometry(coeffs, geometry, cutoff_e), **kwargs)

    def assertModeVariances(self, expected, result):  # pylint: disable=invalid-name
        n = result.geometry.n
        power = np.abs(np.fft.fft2(result.fields, axes=(-2, -1)) / (n * n)) ** 2
        flat = power.reshape(power.shape[0], -1)
        ess = np.array([effective_sample_size(flat[:, m]) for m in range(flat.shape[1])])
        stderr = flat.std(axis=0, ddof=1) / np.sqrt(ess)
        self.assertGreater(ess.min(), 1000)
        self.assertWithinStandardErrors(expected.ravel(), flat.mean(axis=0), stderr)


class McmcConfigTest(McmcTestCase):
    """Tests for sampler settings."""

    def test_validation(self):
        geometry = self.geometry(n=4)
        for kwargs in ({"step": 0.0}, {"step": math.inf}, {"n_samples": 0}, {"thin": 0}, {"burn_in": -1}):
            with self.assertRaises(McmcConfigError):
                self.config(geometry, **kwargs)
        self.assertEqual(3, self.config(geometry, thin=3.0).thin)


class LogTargetTest(McmcTestCase):
    """Tests for the log-density of the target measure."""

    def test_gaussian_gradient(self):
        geometry = self.geometry(n=8)
        cfg = self.config(geometry, coeffs=())
        f = self.random_field(geometry, 1)
        log_density, gradient = log_target_and_grad(f, cfg)

        stiffness = apply_multiplier(f, mass_symbol(geometry))
        np.testing.assert_allclose(-stiffness, gradient.values, atol=1e-12)
        coeffs = np.fft.fft2(f.values) / geometry.sites
        self.assertAlmostEqual(-0.5 * float(np.sum(mass_symbol(geometry) * np.abs(coeffs) ** 2)), log_density)

    def test_finite_differences(self):
        geometry = self.geometry(n=8)
        cfg = self.config(geometry)
        f = self.random_field(geometry, 2)
        direction = self.random_field(geometry, 3)
        _, gradient = log_target_and_grad(f, cfg)
        expected = gradient.inner(direction)

        errors = []
        for h in (1e-3, 1e-4):
            upper, _ = log_target_and_grad(f + direction * h, cfg)
            lower, _ = log_target_and_grad(f - direction * h, cfg)
            errors.append(abs((upper - lower) / (2 * h) - expected))
        self.assertLess(errors[1], 1e-6 * max(abs(expected), 1.0))
        self.assertLess(errors[0], 1e-3 * max(abs(expected), 1.0))

    def test_translation_invariance(self):
        geometry = self.geometry(n=8)
        cfg = self.config(geometry)
        f = self.random_field(geometry, 4)
        shifted = f.translated((3, 5))
        self.assertAlmostEqual(log_target_and_grad(f, cfg)[0], log_target_and_grad(shifted, cfg)[0], places=10)


class MalaTest(McmcTestCase):
    """Tests for MALA chains."""

    def test_gaussian_spectrum(self):
        geometry = self.geometry(n=8)
        cfg = self.config(geometry, coeffs=(), cutoff_e="inf", burn_in=1000, n_samples=20_000, seed=5)
        result = mala_chain(cfg)
        self.assertAlmostEqual(0.574, result.acceptance_rate, delta=0.15)
        self.assertModeVariances(pv_covariance_symbol(geometry, INFINITE_SCALE), result)

    def test_quadratic_spectrum(self):
        geometry = self.geometry(n=8)
        a2 = 0.5
        cfg = self.config(geometry, coeffs=(0.0, a2), cutoff_e=1e12, burn_in=1000, n_samples=20_000, seed=6)
        self.assertModeVariances(quadratic_mode_variance(geometry, a2), mala_chain(cfg))

    def test_small_steps(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry, step=1e-5, adapt=False, burn_in=0, n_samples=2000)
        self.assertGreaterEqual(mala_chain(cfg).acceptance_rate, 0.999)

        unconditioned = self.config(geometry, step=1e-5, adapt=False, burn_in=0, n_samples=500, preconditioned=False)
        self.assertGreaterEqual(mala_chain(unconditioned).acceptance_rate, 0.99)

    def test_zero_acceptance(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry, step=1e6, adapt=False, burn_in=200, n_samples=10)
        with self.assertRaises(ZeroAcceptanceError):
            mala_chain(cfg)

    def test_determinism(self):
        geometry = self.geometry(n=4)
        cfg = self.config(geometry, burn_in=100, n_samples=50, thin=2, seed=3)
        first = mala_chain(cfg)
        np.testing.assert_array_equal(first.fields, mala_chain(cfg).fields)
        self.assertEqual(50, len(first.samples))
        self.assertEqual(set(("l2", "max", "v0")), set(first.ess))

        serial = run_chains(cfg, 3, workers=1)
        threaded = run_chains(cfg, 3, workers=3)
        np.testing.assert_array_equal(first.fields, serial[0].fields)
        for expected, actual in zip(serial, threaded):
            np.testing.assert_array_equal(expected.fields, actual.fields)
        self.assertFalse(np.array_equal(serial[0].fields, serial[1].fields))

        pooled = pooled_estimate(serial, "l2")
        self.assertAlmostEqual(np.mean([r.observables["l2"] for r in serial]), pooled.value)

    def test_detailed_balance(self):
        geometry = self.geometry(n=2)
        cfg = self.config(geometry, burn_in=1000, thin=20, n_samples=2000, seed=9)
        low = mala_chain(cfg, initial=RealField.zeros(geometry), chain=0)
        high = mala_chain(cfg, initial=RealField.constant(geometry, 3.0), chain=1)
        result = stats.ks_2samp(low.observables["l2"], high.observables["l2"])
        self.assertGreater(result.pvalue, 0.01)


class EffectiveSampleSizeTest(McmcTestCase):
    """Tests for the autocorrelation-based effective sample size."""

    def test_independent(self):
        values = np.random.default_rng(0).standard_normal(20_000)
        self.assertAlmostEqual(20_000, effective_sample_size(values), delta=2_000)

    def test_autoregressive(self):
        rng = np.random.default_rng(1)
        phi = 0.9
        values = np.zeros(50_000)
        noise = rng.standard_normal(values.size)
        for i in range(1, values.size):
            values[i] = phi * values[i - 1] + noise[i]
        expected = values.size * (1 - phi) / (1 + phi)
        self.assertAlmostEqual(expected, effective_sample_size(values), delta=0.25 * expected)

    def test_degenerate(self):
        self.assertEqual(3.0, effective_sample_size([1.0, 2.0, 3.0]))
        self.assertEqual(10.0, effective_sample_size(np.ones(10)))
