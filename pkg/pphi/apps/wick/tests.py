import math

import numpy as np
from numpy.polynomial import Polynomial

from ...test import PPhiTestCase
from ..gff.sampling import covariance_at_offset, sample_gff_batch
from ..lattice.models import RealField
from ..lattice.spectral import variance_c_eps
from .exceptions import PolynomialError
from .models import WickPolynomial, parse_cutoff
from .potential import (
    chi_e,
    chi_e_prime,
    chi_e_second,
    grad_v0_cut,
    grad_v0_cut_values,
    hermite,
    v0,
    v0_cut,
    v0_cut_and_grad_values,
    v0_values,
    wick_combination,
    wick_polynomial_field,
    wick_power,
    wick_series,
)

QUARTIC = (0.0, 0.0, 0.0, 1.0)


class WickPolynomialTest(PPhiTestCase):
    """Tests for the interaction polynomial model."""

    def test_validation(self):
        poly = WickPolynomial((0.5, 1.0, 0.0, 2.0), wick_variance=0.3, cutoff_e="inf")
        self.assertEqual(4, poly.degree)
        self.assertFalse(poly.has_cutoff)
        self.assertTrue(WickPolynomial((0.0, 0.0)).is_zero)
        self.assertEqual((), WickPolynomial(()).coeffs)

        for coeffs in ((1.0,), (0.0, 0.0, 1.0), (0.0, -1.0), (0.0, math.nan)):
            with self.assertRaises(PolynomialError):
                WickPolynomial(coeffs)
        with self.assertRaises(PolynomialError):
            WickPolynomial(QUARTIC, wick_variance=-1.0)
        with self.assertRaises(PolynomialError):
            WickPolynomial(QUARTIC, cutoff_e=0.0)

    def test_parse_cutoff(self):
        self.assertTrue(math.isinf(parse_cutoff("inf")))
        self.assertTrue(math.isinf(parse_cutoff(None)))
        self.assertEqual(12.5, parse_cutoff("12.5"))
        with self.assertRaises(PolynomialError):
            parse_cutoff("lots")

    def test_for_geometry(self):
        geometry = self.geometry(n=8)
        poly = WickPolynomial.for_geometry(QUARTIC, geometry, cutoff_e=100.0)
        self.assertEqual(variance_c_eps(geometry), poly.wick_variance)
        self.assertEqual(100.0, poly.cutoff_e)
        self.assertEqual(0.25, WickPolynomial((0.0, 0.25)).quadratic_coefficient())
        with self.assertRaises(PolynomialError):
            poly.quadratic_coefficient()


class HermiteTest(PPhiTestCase):
    """Tests for Hermite polynomials and Wick powers."""

    def test_hermite(self):
        for x in (-1.7, 0.0, 0.4, 3.0):
            self.assertEqual(1.0, hermite(0, x))
            self.assertEqual(x, hermite(1, x))
            self.assertAlmostEqual(x**4 - 6 * x**2 + 3, hermite(4, x), places=12)

        rng = np.random.default_rng(0)
        for x in rng.normal(size=5):
            for n in range(1, 12):
                terms = (hermite(n + 1, x), x * hermite(n, x), n * hermite(n - 1, x))
                residual = terms[0] - terms[1] + terms[2]
                self.assertAlmostEqual(0.0, residual, delta=1e-12 * max(1.0, *map(abs, terms)))

        with self.assertRaises(PolynomialError):
            hermite(-1, 0.0)

    def test_orthogonality(self):
        samples = np.random.default_rng(42).standard_normal(1_000_000)
        values = [hermite(n, samples) for n in range(6)]
        pairs = [(n, m) for n in range(6) for m in range(n, 6)]
        for n, m in pairs:
            expected = math.factorial(n) if n == m else 0.0
            self.assertMeanWithinStandardErrors(expected, values[n] * values[m], comparisons=len(pairs))

    def test_wick_power(self):
        geometry = self.geometry(n=4)
        field = self.random_field(geometry, seed=1)
        c = 0.7

        self.assertFieldsClose(field, wick_power(field, 1, c))
        f = field.values
        expected = RealField(geometry, f**4 - 6 * c * f**2 + 3 * c**2)
        self.assertFieldsClose(expected, wick_power(field, 4, c), atol=1e-12)

        # scaled Hermite form, and plain powers at c = 0
        scaled = RealField(geometry, c**2.5 * hermite(5, f / math.sqrt(c)))
        self.assertFieldsClose(scaled, wick_power(field, 5, c), atol=1e-10)
        self.assertFieldsClose(RealField(geometry, f**3), wick_power(field, 3, 0.0), atol=1e-12)

    def test_leading_coefficient(self):
        c = 1.3
        points = np.linspace(-2.0, 2.0, 17)
        for n in range(1, 9):
            values = wick_series(points, c, n)[n]
            fitted = Polynomial.fit(points, values - points**n, n, domain=[-2.0, 2.0])
            coefficients = fitted.coef
            self.assertAlmostEqual(0.0, coefficients[n], places=8)
            if n >= 2:
                self.assertAlmostEqual(0.0, coefficients[n - 1], places=8)

    def test_gaussian_wick_moments(self):
        geometry = self.geometry(n=8)
        samples = sample_gff_batch(geometry, 17, 20_000)
        c = variance_c_eps(geometry)
        squares = wick_series(samples, c, 2)[2]

        offset = (1, 2)
        origin = squares[:, 0, 0]
        other = squares[:, offset[0], offset[1]]
        self.assertMeanWithinStandardErrors(0.0, origin, comparisons=2)
        self.assertMeanWithinStandardErrors(
            2 * covariance_at_offset(geometry, offset) ** 2, origin * other, comparisons=2
        )


class HamiltonianTest(PPhiTestCase):
    """Tests for the Wick-ordered Hamiltonian."""

    def test_polynomial_field(self):
        geometry = self.geometry(n=4)
        field = self.random_field(geometry, seed=2)

        np.testing.assert_array_equal(field.values, wick_combination(field.values, (1.0,), 0.4))

        quartic = WickPolynomial(QUARTIC, wick_variance=1.0)
        zero = RealField.zeros(geometry)
        self.assertFieldsClose(RealField.constant(geometry, 3.0), wick_polynomial_field(zero, quartic))

        first = WickPolynomial((0.3, 0.0, 0.0, 1.0), wick_variance=0.5)
        second = WickPolynomial((0.0, 2.0), wick_variance=0.5)
        both = WickPolynomial((0.3, 2.0, 0.0, 1.0), wick_variance=0.5)
        self.assertFieldsClose(
            wick_polynomial_field(field, both),
            wick_polynomial_field(field, first) + wick_polynomial_field(field, second),
            atol=1e-12,
        )

    def test_v0(self):
        geometry = self.geometry(n=8)
        quartic = WickPolynomial(QUARTIC, wick_variance=1.0)
        self.assertAlmostEqual(3.0, v0(RealField.zeros(geometry), quartic))

        field = self.random_field(geometry, seed=3)
        linear = WickPolynomial((0.7, 0.0, 0.0, 1.0), wick_variance=1.0)
        self.assertAlmostEqual(0.7 * float(field.values.mean()), v0(field, linear) - v0(field, quartic), places=12)

        shifted = field.translated((3, 5))
        self.assertAlmostEqual(v0(field, linear), v0(shifted, linear), places=12)

        stack = np.stack([field.values, shifted.values, np.zeros(geometry.shape)])
        np.testing.assert_allclose([v0(field, linear), v0(field, linear), 3.0], v0_values(stack, linear))


class CutoffTest(PPhiTestCase):
    """Tests for the energy cut-off χ_E."""

    def test_values(self):
        for cutoff in (0.5, 3.0, 100.0):
            self.assertEqual(cutoff / 4, chi_e(cutoff / 4, cutoff))
            self.assertEqual(-cutoff, chi_e(-cutoff, cutoff))
            self.assertAlmostEqual(cutoff, chi_e(2 * cutoff, cutoff), places=12)
            self.assertAlmostEqual(cutoff, chi_e(1.5 * cutoff, cutoff), places=12)
        self.assertEqual(1e9, chi_e(1e9, math.inf))
        with self.assertRaises(PolynomialError):
            chi_e(1.0, 0.0)

    def test_shape(self):
        cutoff = 2.0
        grid = np.linspace(0.0, 2 * cutoff, 1000)
        values = chi_e(grid, cutoff)
        second_differences = values[2:] - 2 * values[1:-1] + values[:-2]
        self.assertLessEqual(float(second_differences.max()), 1e-9)

        slopes = chi_e_prime(grid, cutoff)
        self.assertTrue(np.all((slopes >= 0) & (slopes <= 1)))
        self.assertTrue(np.all(values <= grid + 1e-12))
        self.assertTrue(np.all(chi_e_second(grid, cutoff) <= 0))

        # derivatives against finite differences, including across the junctions
        h = 1e-6
        for x in (0.3, 1.0, 1.7, 2.5, 3.0, 3.5):
            numeric = (chi_e(x + h, cutoff) - chi_e(x - h, cutoff)) / (2 * h)
            self.assertAlmostEqual(numeric, chi_e_prime(x, cutoff), places=6)
            numeric = (chi_e_prime(x + h, cutoff) - chi_e_prime(x - h, cutoff)) / (2 * h)
            self.assertAlmostEqual(numeric, chi_e_second(x, cutoff), places=5)

    def test_monotone_in_cutoff(self):
        grid = np.linspace(0.0, 50.0, 501)
        cutoffs = np.geomspace(0.1, 40.0, 30)
        previous = chi_e(grid, cutoffs[0])
        for cutoff in cutoffs[1:]:
            current = chi_e(grid, cutoff)
            self.assertTrue(np.all(current >= previous - 1e-12))
            previous = current
        sup = max(float(np.max(np.abs(chi_e_prime(grid, cutoff)))) for cutoff in cutoffs)
        self.assertLessEqual(sup, 1.0)


class CutHamiltonianTest(PPhiTestCase):
    """Tests for v₀^E and its gradient."""

    def test_v0_cut(self):
        geometry = self.geometry(n=4)
        quadratic = WickPolynomial((0.0, 1.0), wick_variance=0.0, cutoff_e=10.0)

        small = RealField.constant(geometry, 1.0)  # v0 = 1 = 0.1 E
        self.assertAlmostEqual(1.0, v0_cut(small, quadratic))
        self.assertEqual(10.0, v0_cut(RealField.constant(geometry, 100.0), quadratic))

        field = self.random_field(geometry, seed=4, scale=3.0)
        self.assertLessEqual(v0_cut(field, quadratic), v0(field, quadratic))
        self.assertLessEqual(v0_cut(field, quadratic), 10.0)

        values = [v0_cut(field, quadratic.with_cutoff(cutoff)) for cutoff in np.geomspace(0.5, 50.0, 20)]
        self.assertTrue(all(a <= b + 1e-12 for a, b in zip(values, values[1:])))

    def test_gradient(self):
        geometry = self.geometry(n=4)
        field = self.random_field(geometry, seed=5)

        quadratic = WickPolynomial((0.0, 0.8), wick_variance=0.6)
        self.assertFieldsClose(1.6 * field, grad_v0_cut(field, quadratic), atol=1e-12)
        self.assertFieldsClose(RealField.zeros(geometry), grad_v0_cut(field, WickPolynomial(())))

    def test_gradient_finite_differences(self):
        geometry = self.geometry(n=4)
        field = self.random_field(geometry, seed=6, scale=1.6)
        direction = self.random_field(geometry, seed=7)
        base = WickPolynomial((0.2, -0.5, 0.3, 1.0), wick_variance=0.4)
        self.assertGreater(v0(field, base), 0.0)
        # E = v0(f) puts f in the middle of the bridge
        poly = base.with_cutoff(v0(field, base))

        gradient = grad_v0_cut(field, poly).inner(direction)
        errors = []
        for h in (1e-3, 1e-4):
            numeric = (v0_cut(field + h * direction, poly) - v0_cut(field - h * direction, poly)) / (2 * h)
            errors.append(abs(numeric - gradient))
        self.assertLess(errors[0], 1e-3 * max(abs(gradient), 1.0))
        # O(h²): a tenfold smaller step shrinks the error by far more than tenfold
        self.assertLess(errors[1], errors[0] / 20 + 1e-9)

    def test_gradient_bound(self):
        geometry = self.geometry(n=8)
        poly = WickPolynomial.for_geometry(QUARTIC, geometry, cutoff_e=5.0)
        sups = []
        for seed in range(3):
            stack = np.stack([self.random_field(geometry, seed=100 * seed + r).values for r in range(50)])
            sups.append(float(np.abs(grad_v0_cut_values(stack, poly)).max()))
        self.assertTrue(all(math.isfinite(s) for s in sups))
        self.assertLess(max(sups), 10 * min(sups))

    def test_combined_evaluation(self):
        geometry = self.geometry(n=4)
        poly = WickPolynomial((0.1, 0.0, 0.0, 1.0), wick_variance=0.3, cutoff_e=2.0)
        stack = np.stack([self.random_field(geometry, seed=s).values for s in range(4)])
        hamiltonian, gradient = v0_cut_and_grad_values(stack, poly)
        for index in range(4):
            field = RealField(geometry, stack[index])
            self.assertAlmostEqual(v0_cut(field, poly), hamiltonian[index], places=12)
            np.testing.assert_allclose(grad_v0_cut(field, poly).values, gradient[index], atol=1e-12)
