import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import override_settings
from scipy import integrate

from ...test import PPhiTestCase
from .exceptions import DualIndexError, FieldFormatError, GeometryError, IncompatibleGridError, SymmetryError
from .io import dump_field, load_field, read_field, write_field
from .models import INFINITE_SCALE, LatticeGeometry, RealField, SpectralField
from .spectral import (
    apply_multiplier,
    dual_modes,
    embed_trig,
    forward_fft,
    inverse_fft,
    laplacian_multiplier,
    laplacian_symbol,
    multiplier_deficit,
    pv_covariance_multiplier,
    pv_covariance_symbol,
    q_multiplier,
    q_squared_integral,
    restrict,
    variance_c_eps,
)

TWO_PI = 2 * math.pi


def mode_field(geometry: LatticeGeometry, m1: int, m2: int = 0) -> RealField:
    x1, x2 = np.meshgrid(np.arange(geometry.n), np.arange(geometry.n), indexing="ij")
    phase = TWO_PI * (m1 * x1 + m2 * x2) / geometry.n
    return RealField(geometry, np.cos(phase))


class GeometryTest(PPhiTestCase):
    """Tests for the lattice data model."""

    def test_geometry(self):
        geometry = self.geometry(n=16, mass2=2.0)
        self.assertEqual(1 / 16, geometry.epsilon)
        self.assertEqual(256, geometry.sites)

        with self.assertRaises(GeometryError):
            LatticeGeometry(n=1, mass2=1.0)
        with self.assertRaises(GeometryError):
            LatticeGeometry(n=4, mass2=0.0)

    def test_real_field(self):
        geometry = self.geometry(n=4)
        field = RealField(geometry, np.arange(16.0))
        self.assertEqual((4, 4), field.values.shape)
        self.assertEqual(5.0, field.values[1, 1])

        with self.assertRaises(GeometryError):
            RealField(geometry, np.zeros(15))
        with self.assertRaises(GeometryError):
            RealField(geometry, [math.nan] * 16)

        # normalised inner product: unit volume
        self.assertAlmostEqual(1.0, RealField.constant(geometry, 1.0).inner(RealField.constant(geometry, 1.0)))


class FourierTest(PPhiTestCase):
    """Tests for the discrete Fourier transform."""

    def test_dual_modes(self):
        m1, _ = dual_modes(self.geometry(n=4))
        self.assertEqual([0, 1, 2, -1], list(m1[:, 0]))
        m1, _ = dual_modes(self.geometry(n=5))
        self.assertEqual([0, 1, 2, -2, -1], list(m1[:, 0]))

    def test_forward_fft(self):
        geometry = self.geometry(n=8)

        spectrum = forward_fft(RealField.constant(geometry, 1.0))
        self.assertAlmostEqual(1.0, spectrum.coeff((0, 0)))
        self.assertAlmostEqual(1.0, float(np.sum(np.abs(spectrum.coeffs))))

        spectrum = forward_fft(mode_field(geometry, 1))
        self.assertAlmostEqual(0.5, spectrum.coeff((1, 0)).real)
        self.assertAlmostEqual(0.5, spectrum.coeff((-1, 0)).real)
        self.assertAlmostEqual(1.0, float(np.sum(np.abs(spectrum.coeffs))))

        # Parseval
        field = self.random_field(geometry, seed=3)
        spectrum = forward_fft(field)
        self.assertAlmostEqual(
            1.0, float(np.sum(np.abs(spectrum.coeffs) ** 2)) / field.inner(field), delta=1e-12
        )

    def test_inverse_fft(self):
        geometry = self.geometry(n=6)
        zero = inverse_fft(SpectralField(geometry, np.zeros((6, 6))))
        self.assertFieldsClose(RealField.zeros(geometry), zero)

        coeffs = np.zeros((6, 6), dtype=complex)
        coeffs[0, 0] = 2.5
        self.assertFieldsClose(RealField.constant(geometry, 2.5), inverse_fft(SpectralField(geometry, coeffs)))

        field = self.random_field(geometry, seed=11)
        self.assertFieldsClose(field, inverse_fft(forward_fft(field)), atol=1e-12)

        coeffs[1, 0] = 1j
        with self.assertRaises(SymmetryError):
            inverse_fft(SpectralField(geometry, coeffs))

        # the tolerance scales with the result, so a tiny imaginary field is still caught
        tiny = np.zeros((6, 6), dtype=complex)
        tiny[1, 0] = tiny[-1, 0] = 1e-12j
        with self.assertRaises(SymmetryError):
            inverse_fft(SpectralField(geometry, tiny))
        small = self.random_field(geometry, seed=12, scale=1e-14)
        self.assertFieldsClose(small, inverse_fft(forward_fft(small)), atol=1e-26)

    def test_apply_multiplier(self):
        geometry = self.geometry(n=8)
        field = self.random_field(geometry, seed=5)
        np.testing.assert_allclose(field.values, apply_multiplier(field, np.ones(geometry.shape)), atol=1e-12)

        # a stack of fields is transformed field by field
        stack = np.stack([field.values, 2 * field.values])
        result = apply_multiplier(stack, laplacian_symbol(geometry))
        np.testing.assert_allclose(2 * result[0], result[1], atol=1e-10)


class MultiplierTest(PPhiTestCase):
    """Tests for the Laplacian and Pauli-Villars multipliers."""

    def test_laplacian_multiplier(self):
        geometry = self.geometry(n=4)
        self.assertEqual(0.0, laplacian_multiplier((0, 0), geometry))
        self.assertAlmostEqual(32.0, laplacian_multiplier((TWO_PI, 0), geometry), places=12)

        # Nyquist convention: +n/2 is in the dual set, −n/2 is not
        laplacian_multiplier((TWO_PI * 2, 0), geometry)
        with self.assertRaises(DualIndexError):
            laplacian_multiplier((-TWO_PI * 2, 0), geometry)
        with self.assertRaises(DualIndexError):
            laplacian_multiplier((TWO_PI * 3, 0), geometry)
        with self.assertRaises(DualIndexError):
            laplacian_multiplier((1.0, 0), geometry)

    def test_laplacian_convergence(self):
        k = (TWO_PI, TWO_PI * 2)
        k_squared = k[0] ** 2 + k[1] ** 2
        values = []
        for n in (8, 16, 32, 64, 128, 256):
            geometry = self.geometry(n=n)
            value = laplacian_multiplier(k, geometry)
            values.append(value)

            deficit = sum(ki**2 * multiplier_deficit(geometry.epsilon * ki) for ki in k)
            self.assertAlmostEqual(k_squared - deficit, value, delta=1e-9 * k_squared)

        self.assertTrue(all(a < b for a, b in zip(values, values[1:])))
        self.assertTrue(all(value < k_squared for value in values))

    def test_laplacian_symbol(self):
        geometry = self.geometry(n=16)
        symbol = laplacian_symbol(geometry)
        self.assertEqual(0.0, symbol[0, 0])
        self.assertTrue(np.all(symbol[symbol != symbol[0, 0]] > 0))
        self.assertLessEqual(float(symbol.max()), 8 / geometry.epsilon**2 + 1e-9)
        self.assertAlmostEqual(8 / geometry.epsilon**2, float(symbol[8, 8]))

    def test_pv_covariance_multiplier(self):
        geometry = self.geometry(n=8, mass2=1.0)
        for mode in ((0, 0), (TWO_PI, 0), (TWO_PI * 4, -TWO_PI * 3)):
            self.assertEqual(0.0, pv_covariance_multiplier(mode, 0, geometry))
        self.assertEqual(1.0, pv_covariance_multiplier((0, 0), INFINITE_SCALE, geometry))
        self.assertEqual(0.5, pv_covariance_multiplier((0, 0), 1, geometry))

        np.testing.assert_array_equal(np.zeros(geometry.shape), pv_covariance_symbol(geometry, 0))

    def test_q_multiplier(self):
        geometry = self.geometry(n=8, mass2=1.0)
        self.assertEqual(1.0, q_multiplier((TWO_PI, TWO_PI), 0, geometry))
        self.assertAlmostEqual(1 / 3, q_multiplier((0, 0), 2, geometry))
        self.assertEqual(0.0, q_multiplier((0, 0), INFINITE_SCALE, geometry))

        values = [q_multiplier((TWO_PI, 0), t, geometry) for t in (0.0, 0.1, 1.0, 10.0)]
        self.assertTrue(all(a > b for a, b in zip(values, values[1:])))
        self.assertGreater(q_multiplier((0, 0), 1, geometry), q_multiplier((TWO_PI, 0), 1, geometry))

    def test_pauli_villars_completeness(self):
        geometry = self.geometry(n=8, mass2=0.5)
        for mode in ((0, 0), (TWO_PI, 0), (TWO_PI * 4, TWO_PI * 4)):
            for t in (0.01, 1.0, 100.0, INFINITE_SCALE):
                self.assertAlmostEqual(
                    pv_covariance_multiplier(mode, t, geometry),
                    q_squared_integral(mode, 0, t, geometry),
                    delta=1e-12 * pv_covariance_multiplier(mode, INFINITE_SCALE, geometry),
                )

        # against quadrature of q̂²
        mode = (TWO_PI, TWO_PI)
        expected, _ = integrate.quad(lambda s: q_multiplier(mode, s, geometry) ** 2, 0.5, 2.0, epsabs=1e-14)
        self.assertAlmostEqual(expected, q_squared_integral(mode, 0.5, 2.0, geometry), delta=1e-12)

    def test_variance_c_eps(self):
        geometry = self.geometry(n=8, mass2=1.0)
        self.assertGreater(variance_c_eps(geometry), 0)
        self.assertAlmostEqual(
            float(np.sum(pv_covariance_symbol(geometry, INFINITE_SCALE))), variance_c_eps(geometry)
        )

        # logarithmic divergence with slope 1/2π
        variances = {n: variance_c_eps(self.geometry(n=n)) for n in (8, 16, 32, 64, 128, 256)}
        slope = (variances[256] - variances[128]) / math.log(2)
        self.assertAlmostEqual(1 / TWO_PI, slope, delta=0.05 / TWO_PI)

        offsets = [variances[n] - math.log(n) / TWO_PI for n in variances]
        self.assertLess(max(offsets) - min(offsets), 0.2)


class EmbeddingTest(PPhiTestCase):
    """Tests for trigonometric embedding and restriction."""

    def test_embed_constant(self):
        geometry = self.geometry(n=4)
        fine = embed_trig(RealField.constant(geometry, 1.5), 16)
        self.assertFieldsClose(RealField.constant(geometry.refined(16), 1.5), fine, atol=1e-12)

    def test_embed_preserves_sites(self):
        for n in (5, 8):
            geometry = self.geometry(n=n)
            field = self.random_field(geometry, seed=n)
            fine = embed_trig(field, 4 * n)
            np.testing.assert_allclose(field.values, fine.values[::4, ::4], atol=1e-10)

    def test_embed_isometry(self):
        geometry = self.geometry(n=5)
        field = self.random_field(geometry, seed=2)
        fine = embed_trig(field, 15)
        self.assertAlmostEqual(field.inner(field), fine.inner(fine), delta=1e-12 * field.inner(field))

    def test_embed_isometry_even(self):
        geometry = self.geometry(n=8)
        field = self.random_field(geometry, seed=4)
        coeffs = forward_fft(field).coeffs
        m1, m2 = dual_modes(geometry)
        nyquist = (m1 == 4).astype(int) + (m2 == 4).astype(int)

        # Nyquist modes keep 2^−ν of their energy
        fine = embed_trig(field, 32)
        expected = float(np.sum(2.0**-nyquist * np.abs(coeffs) ** 2))
        self.assertAlmostEqual(expected, fine.inner(fine), delta=1e-12 * expected)
        self.assertLess(fine.inner(fine), field.inner(field))
        self.assertFieldsClose(field, restrict(fine, 8), atol=1e-12)

        free = inverse_fft(SpectralField(geometry, np.where(nyquist == 0, coeffs, 0.0)))
        fine = embed_trig(free, 32)
        self.assertAlmostEqual(free.inner(free), fine.inner(fine), delta=1e-12 * free.inner(free))
        self.assertFieldsClose(free, restrict(fine, 8), atol=1e-12)

        alternating = mode_field(geometry, 4)
        fine = embed_trig(alternating, 16)
        self.assertAlmostEqual(1.0, alternating.inner(alternating), delta=1e-12)
        self.assertAlmostEqual(0.5, fine.inner(fine), delta=1e-12)
        np.testing.assert_allclose(alternating.values, fine.values[::2, ::2], atol=1e-12)

    def test_embed_single_mode(self):
        geometry = self.geometry(n=8)
        fine = embed_trig(mode_field(geometry, 1, 2), 32)
        self.assertFieldsClose(mode_field(geometry.refined(32), 1, 2), fine, atol=1e-12)

    def test_restrict(self):
        geometry = self.geometry(n=8)
        field = self.random_field(geometry, seed=9)
        self.assertFieldsClose(field, restrict(embed_trig(field, 24), 8), atol=1e-12)

        fine = geometry.refined(16)
        self.assertFieldsClose(RealField.zeros(geometry), restrict(mode_field(fine, 6), 8), atol=1e-12)

        mixed = mode_field(fine, 1) + mode_field(fine, 3, 7) + mode_field(fine, 2, -1)
        expected = mode_field(geometry, 1) + mode_field(geometry, 2, -1)
        self.assertFieldsClose(expected, restrict(mixed, 8), atol=1e-12)

    def test_incompatible_grids(self):
        field = RealField.zeros(self.geometry(n=8))
        with self.assertRaises(IncompatibleGridError):
            embed_trig(field, 12)
        with self.assertRaises(IncompatibleGridError):
            embed_trig(field, 4)
        with self.assertRaises(IncompatibleGridError):
            restrict(field, 3)


class FieldFileTest(PPhiTestCase):
    """Tests for binary field dumps."""

    def test_dump(self):
        geometry = self.geometry(n=4, mass2=0.25)
        field = self.random_field(geometry, seed=1)
        data = dump_field(field)
        self.assertEqual(b"PPHI", data[:4])
        self.assertEqual(4 + 2 + 4 + 8 + 16 * 8, len(data))
        self.assertEqual(field.values[0, 1], np.frombuffer(data[18:], dtype="<f8")[1])

        loaded = load_field(data)
        self.assertEqual(geometry, loaded.geometry)
        np.testing.assert_array_equal(field.values, loaded.values)

        with self.assertRaises(FieldFormatError):
            load_field(b"XPHI" + data[4:])
        with self.assertRaises(FieldFormatError):
            load_field(data[:-8])
        with self.assertRaises(FieldFormatError):
            load_field(data[:10])

    def test_write_read(self):
        field = self.random_field(self.geometry(n=6), seed=8)
        with tempfile.TemporaryDirectory() as directory:
            path = write_field(field, Path(directory) / "phi.pphi", compress=False)
            self.assertEqual("phi.pphi", path.name)
            np.testing.assert_array_equal(field.values, read_field(path).values)

            with override_settings(PPHI_COMPRESS=True):
                path = write_field(field, Path(directory) / "psi.pphi")
            self.assertEqual("psi.pphi.gz", path.name)
            np.testing.assert_array_equal(field.values, read_field(Path(directory) / "psi.pphi").values)
