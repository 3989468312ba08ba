import math
from unittest.mock import patch

import numpy as np

from ...test import PPhiTestCase
from ..gff.sampling import sample_gff_batch
from ..lattice.models import RealField
from ..lattice.spectral import forward_fft
from .exceptions import BlockIndexError, NormParameterError
from .models import DyadicPartition, max_norm_frequency, smooth_step, top_block_index
from .spaces import besov_norm, holder_norm, holder_seminorm, lp_block, lp_norm, sobolev_norm, sobolev_norm_values

TWO_PI = 2 * math.pi


def mode_field(geometry, m1, m2=0):
    x1, x2 = np.meshgrid(np.arange(geometry.n), np.arange(geometry.n), indexing="ij")
    return RealField(geometry, np.cos(TWO_PI * (m1 * x1 + m2 * x2) / geometry.n))


def complex_mode(geometry, m1, m2=0):
    """Real and imaginary parts of e^{ik·x}; their norms combine to the complex mode's."""
    x1, x2 = np.meshgrid(np.arange(geometry.n), np.arange(geometry.n), indexing="ij")
    phase = TWO_PI * (m1 * x1 + m2 * x2) / geometry.n
    return RealField(geometry, np.cos(phase)), RealField(geometry, np.sin(phase))


class PartitionTest(PPhiTestCase):
    """Tests for the dyadic partition of unity."""

    def test_smooth_step(self):
        self.assertEqual(1.0, smooth_step(np.array(0.75)))
        self.assertEqual(0.0, smooth_step(np.array(4 / 3)))
        values = smooth_step(np.linspace(0.0, 2.0, 201))
        self.assertTrue(np.all(np.diff(values) <= 0))

    def test_partition_of_unity(self):
        for n in (8, 16, 64):
            partition = DyadicPartition.for_geometry(self.geometry(n=n))
            total = np.sum(partition.blocks, axis=0)
            self.assertLessEqual(float(np.max(np.abs(total - 1.0))), 1e-12)
            self.assertEqual(top_block_index(self.geometry(n=n)), partition.top)
            self.assertLess(2**partition.top * 4 / 3, math.pi * n)
            self.assertGreaterEqual(2 ** (partition.top + 1) * 4 / 3, math.pi * n)

    def test_supports(self):
        geometry = self.geometry(n=64)
        partition = DyadicPartition.for_geometry(geometry)
        r = max_norm_frequency(geometry)

        self.assertTrue(np.all(partition.block(-1)[r > 2 / 3] == 0))
        for j in range(partition.top):
            block = partition.block(j)
            outside = (r < 2**j * 3 / 8) | (r > 2**j * 4 / 3)
            inside = (r >= 2**j * 2 / 3) & (r <= 2**j * 3 / 4)
            self.assertTrue(np.all(block[outside] == 0))
            self.assertTrue(np.allclose(block[inside], 1.0))
            self.assertTrue(np.all(block >= -1e-15))

        with self.assertRaises(BlockIndexError):
            partition.block(-2)
        with self.assertRaises(BlockIndexError):
            partition.block(partition.top + 1)


class LpTest(PPhiTestCase):
    """Tests for Lᵖ norms."""

    def test_lp_norm(self):
        geometry = self.geometry(n=8)
        one = RealField.constant(geometry, 1.0)
        for p in (1, 1.5, 2, 4, math.inf):
            self.assertAlmostEqual(1.0, lp_norm(one, p), places=12)

        field = self.random_field(geometry, seed=1)
        parseval = float(np.sum(np.abs(forward_fft(field).coeffs) ** 2))
        self.assertAlmostEqual(parseval, lp_norm(field, 2) ** 2, delta=1e-12 * parseval)

        other = self.random_field(geometry, seed=2)
        product = RealField(geometry, field.values * other.values)
        self.assertLessEqual(lp_norm(product, 1), lp_norm(field, 2) * lp_norm(other, 2))

        with self.assertRaises(NormParameterError):
            lp_norm(field, 0.5)


class SobolevTest(PPhiTestCase):
    """Tests for discrete Sobolev norms."""

    def test_stacked(self):
        geometry = self.geometry(n=8)
        stack = np.stack([self.random_field(geometry, seed).values for seed in range(3)])
        for alpha in (0.0, 1.0):
            expected = [sobolev_norm(RealField(geometry, values), alpha) for values in stack]
            np.testing.assert_allclose(expected, sobolev_norm_values(stack, geometry, alpha), rtol=1e-12)

    def test_sobolev_norm(self):
        geometry = self.geometry(n=8)
        self.assertEqual(0.0, sobolev_norm(RealField.zeros(geometry), 1.0))
        for alpha in (-1.0, 0.0, 0.5, 2.0):
            self.assertAlmostEqual(1.0, sobolev_norm(RealField.constant(geometry, 1.0), alpha), places=12)

        # e^{ik·x} has norm² (1 + |k|²)^α; cos and sin carry half each
        k_squared = TWO_PI**2 * (1 + 4)
        real, imaginary = complex_mode(geometry, 1, 2)
        for alpha in (0.5, 1.0):
            squared = sobolev_norm(real, alpha) ** 2 + sobolev_norm(imaginary, alpha) ** 2
            self.assertAlmostEqual((1 + k_squared) ** alpha, squared, delta=1e-10 * (1 + k_squared) ** alpha)

    def test_monotone_in_alpha(self):
        field = self.random_field(self.geometry(n=16), seed=3)
        values = [sobolev_norm(field, alpha) for alpha in (-1.0, 0.0, 0.5, 1.0, 1.5)]
        self.assertTrue(all(a <= b for a, b in zip(values, values[1:])))
        besov = [besov_norm(field, 2, 2, alpha) for alpha in (0.0, 0.5, 1.0, 1.5)]
        self.assertTrue(all(a <= b for a, b in zip(besov, besov[1:])))

    def test_sobolev_embedding(self):
        # ‖f‖_∞ ≲ ‖f‖_{H^{1.1}} with a constant fitted on the coarsest lattice
        ratios = {}
        for n in (8, 16, 32):
            geometry = self.geometry(n=n)
            samples = sample_gff_batch(geometry, 5, 40)
            smooth = [RealField(geometry, values) for values in samples]
            ratios[n] = [lp_norm(f, math.inf) / sobolev_norm(f, 1.1) for f in smooth]
        constant = 2 * max(ratios[8])
        for n in (16, 32):
            self.assertLessEqual(max(ratios[n]), constant)


class BesovTest(PPhiTestCase):
    """Tests for Littlewood-Paley blocks and Besov norms."""

    def test_blocks(self):
        geometry = self.geometry(n=32)
        partition = DyadicPartition.for_geometry(geometry)
        field = self.random_field(geometry, seed=4)

        total = sum((lp_block(field, j, partition) for j in partition.indices), RealField.zeros(geometry))
        self.assertFieldsClose(field, total, atol=1e-10)

        for j in partition.indices:
            for other in partition.indices:
                if abs(j - other) >= 2:
                    twice = lp_block(lp_block(field, j, partition), other, partition)
                    self.assertLessEqual(lp_norm(twice, math.inf), 1e-10)

    def test_single_mode_block(self):
        geometry = self.geometry(n=64)
        partition = DyadicPartition.for_geometry(geometry)
        # |k|_∞ = 14π ∈ 2⁶·[2/3, 3/4]
        for mode in ((7, 0), (7, 3)):
            field = mode_field(geometry, *mode)
            self.assertFieldsClose(field, lp_block(field, 6, partition), atol=1e-12)
            self.assertFieldsClose(RealField.zeros(geometry), lp_block(field, 5, partition), atol=1e-12)

            for alpha in (0.5, 1.0):
                expected = 2 ** (6 * alpha) * lp_norm(lp_block(field, 6, partition), 2)
                self.assertAlmostEqual(expected, besov_norm(field, 2, 2, alpha, partition), delta=1e-10 * expected)
                self.assertAlmostEqual(
                    2 ** (6 * alpha) * lp_norm(field, math.inf),
                    besov_norm(field, math.inf, math.inf, alpha, partition),
                    places=9,
                )

        self.assertEqual(0.0, besov_norm(RealField.zeros(geometry), 2, 2, 1.0))

    def test_equivalence_with_sobolev(self):
        ratios = {}
        for n in (16, 32, 64):
            geometry = self.geometry(n=n)
            samples = sample_gff_batch(geometry, 8, 200)
            fields = [RealField(geometry, values) for values in samples]
            for alpha in (-0.5, 0.5, 1.0):
                ratios[n, alpha] = np.array([besov_norm(f, 2, 2, alpha) / sobolev_norm(f, alpha) for f in fields])

        for alpha in (-0.5, 0.5, 1.0):
            calibration = ratios[16, alpha]
            constant = 2 * max(float(calibration.max()), 1 / float(calibration.min()))
            for n in (32, 64):
                self.assertLessEqual(float(ratios[n, alpha].max()), constant)
                self.assertGreaterEqual(float(ratios[n, alpha].min()), 1 / constant)

    def test_translation_invariance(self):
        geometry = self.geometry(n=16)
        field = self.random_field(geometry, seed=6)
        shifted = field.translated((5, 11))
        self.assertAlmostEqual(sobolev_norm(field, 0.7), sobolev_norm(shifted, 0.7), places=10)
        self.assertAlmostEqual(besov_norm(field, 3, 2, 0.4), besov_norm(shifted, 3, 2, 0.4), places=10)
        self.assertAlmostEqual(lp_norm(field, 3), lp_norm(shifted, 3), places=12)
        self.assertAlmostEqual(holder_norm(field, 0.5, 4), holder_norm(shifted, 0.5, 4), places=9)


class HolderTest(PPhiTestCase):
    """Tests for Hölder norms on the refined grid."""

    def test_constant(self):
        geometry = self.geometry(n=8)
        self.assertAlmostEqual(2.5, holder_norm(RealField.constant(geometry, -2.5), 0.5, 4), places=10)

    def test_refinement_stability(self):
        geometry = self.geometry(n=8)
        field = mode_field(geometry, 1)
        coarse = holder_norm(field, 0.5, 4) - 1.0
        fine = holder_norm(field, 0.5, 8) - 1.0
        self.assertGreater(coarse, 0)
        self.assertAlmostEqual(1.0, fine / coarse, delta=0.02)

    def test_homogeneity(self):
        field = self.random_field(self.geometry(n=8), seed=7)
        base = holder_norm(field, 0.3, 4)
        self.assertAlmostEqual(3.0 * base, holder_norm(-3.0 * field, 0.3, 4), delta=1e-12 * base)

    def test_exact_supremum(self):
        def all_pairs(values, alpha):
            size = values.shape[0]
            x1, x2 = (axis.ravel() for axis in np.meshgrid(np.arange(size), np.arange(size), indexing="ij"))
            d1 = np.abs(x1[:, np.newaxis] - x1[np.newaxis, :])
            d2 = np.abs(x2[:, np.newaxis] - x2[np.newaxis, :])
            distance = np.hypot(np.minimum(d1, size - d1), np.minimum(d2, size - d2)) / size
            flat = values.ravel()
            gaps = np.abs(flat[:, np.newaxis] - flat[np.newaxis, :])
            off = distance > 0
            return float(np.max(gaps[off] / distance[off] ** alpha))

        rng = np.random.default_rng(12)
        smooth = np.cos(TWO_PI * np.arange(12) / 12)[:, np.newaxis] * np.ones((1, 12))
        for values in (rng.standard_normal((7, 7)), rng.standard_normal((12, 12)), smooth):
            for alpha in (0.2, 0.9):
                expected = all_pairs(values, alpha)
                self.assertAlmostEqual(expected, holder_seminorm(values, alpha), delta=1e-12 * expected)
                # one shift per block exercises the early stop
                with patch("pphi.apps.norms.spaces.HOLDER_BLOCK", 1):
                    self.assertAlmostEqual(expected, holder_seminorm(values, alpha), delta=1e-12 * expected)
        self.assertEqual(0.0, holder_seminorm(np.full((6, 6), 1.5), 0.5))

    def test_parameters(self):
        field = RealField.zeros(self.geometry(n=4))
        with self.assertRaises(NormParameterError):
            holder_norm(field, 1.0)
        with self.assertRaises(NormParameterError):
            holder_norm(field, 0.5, refine=1)
