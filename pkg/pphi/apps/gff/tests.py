import math
import tempfile

import numpy as np

from ...test import PPhiTestCase
from ..lattice.models import INFINITE_SCALE, RealField
from ..lattice.spectral import covariance_increment_symbol, pv_covariance_symbol, variance_c_eps
from .exceptions import GridTimeError, ScaleGridError
from .io import read_path, write_path
from .models import GffPath, ScaleGrid
from .sampling import (
    auto_t_max,
    auto_t_min,
    covariance_at_offset,
    default_grid,
    gaussian_from_noise,
    pointwise_variance_expected,
    sample_gff,
    sample_gff_batch,
    sample_paths,
    sample_scale_path,
    spectral_variance_of,
    white_noise,
    y_field,
)


class ScaleGridTest(PPhiTestCase):
    """Tests for scale grids."""

    def test_validation(self):
        grid = ScaleGrid((INFINITE_SCALE, 2.0, 1.0, 0.0))
        self.assertEqual(3, grid.intervals)
        self.assertEqual((2.0, 1.0), grid.interior)
        self.assertEqual(1, grid.index(2.0))
        self.assertEqual(0, grid.index(INFINITE_SCALE))
        with self.assertRaises(GridTimeError):
            grid.index(1.5)

        for times in ((1.0, 0.0), (INFINITE_SCALE, 1.0), (INFINITE_SCALE, 1.0, 2.0, 0.0), (INFINITE_SCALE,)):
            with self.assertRaises(ScaleGridError):
                ScaleGrid(times)

    def test_geometric(self):
        grid = ScaleGrid.geometric(0.5, 8.0, 1.0)
        self.assertEqual((INFINITE_SCALE, 8.0, 4.0, 2.0, 1.0, 0.0), grid.times)
        self.assertAlmostEqual(0.5, grid.rho)

        with self.assertRaises(ScaleGridError):
            ScaleGrid.geometric(1.0, 8.0, 1.0)
        with self.assertRaises(ScaleGridError):
            ScaleGrid.geometric(0.5, 1.0, 8.0)

    def test_json(self):
        grid = ScaleGrid.geometric(0.7, 3.0, 0.1)
        self.assertEqual("inf", grid.as_json()[0])
        self.assertEqual(grid, ScaleGrid.from_json(grid.as_json()))

    def test_tail_rules(self):
        geometry = self.geometry(n=8)
        total = variance_c_eps(geometry)

        t_max = auto_t_max(geometry)
        tail = float(np.sum(pv_covariance_symbol(geometry, INFINITE_SCALE) - pv_covariance_symbol(geometry, t_max)))
        self.assertAlmostEqual(1e-4 * total, tail, delta=1e-9 * total)

        t_min = auto_t_min(geometry)
        head = float(np.sum(pv_covariance_symbol(geometry, t_min)))
        self.assertAlmostEqual(1e-4 * total, head, delta=1e-9 * total)
        self.assertLess(t_min, t_max)

        grid = default_grid(geometry, rho=0.5)
        self.assertEqual(t_max, grid.times[1])
        self.assertGreaterEqual(grid.times[-2], t_min)
        self.assertLess(grid.times[-2] * 0.5, t_min)


class GffSamplingTest(PPhiTestCase):
    """Tests for exact GFF sampling."""

    def test_determinism(self):
        geometry = self.geometry(n=8)
        np.testing.assert_array_equal(sample_gff(geometry, 7).values, sample_gff(geometry, 7).values)
        self.assertFalse(np.array_equal(sample_gff(geometry, 7).values, sample_gff(geometry, 8).values))
        self.assertFalse(np.array_equal(sample_gff(geometry, 7).values, sample_gff(geometry, 7, replica=1).values))

        batch = sample_gff_batch(geometry, 7, 3)
        np.testing.assert_array_equal(sample_gff(geometry, 7, replica=2).values, batch[2])

    def test_independent_of_scale_paths(self):
        geometry = self.geometry(n=8)
        single = sample_scale_path(geometry, ScaleGrid((INFINITE_SCALE, 0.0)), 7, replica=1)
        path = sample_scale_path(geometry, default_grid(geometry, rho=0.5), 7, replica=1)
        for other in (single.terminal, path.fields[1]):
            self.assertFalse(np.allclose(sample_gff(geometry, 7, replica=1).values, other.values))

        for replica in range(20):
            noise = white_noise(geometry, 7, "gff-terminal", replica)
            self.assertFalse(np.array_equal(noise, white_noise(geometry, 7, "gff", replica, 0)))

    def test_mode_variances(self):
        geometry = self.geometry(n=16)
        samples = sample_gff_batch(geometry, 2024, 10_000)
        coeffs = np.fft.fft2(samples, axes=(-2, -1)) / geometry.sites
        power = np.abs(coeffs) ** 2
        mean = power.mean(axis=0)
        stderr = power.std(axis=0, ddof=1) / math.sqrt(power.shape[0])

        self.assertWithinStandardErrors(pv_covariance_symbol(geometry, INFINITE_SCALE), mean, stderr)
        np.testing.assert_allclose(mean, spectral_variance_of(samples))

    def test_site_statistics(self):
        geometry = self.geometry(n=8)
        samples = sample_gff_batch(geometry, 99, 20_000)
        origin = samples[:, 0, 0]

        self.assertMeanWithinStandardErrors(0.0, origin)
        self.assertMeanWithinStandardErrors(variance_c_eps(geometry), origin**2)

        offsets = [(0, 1), (1, 1), (2, 3), (4, 0), (5, 7)]
        for offset in offsets:
            products = origin * samples[:, offset[0], offset[1]]
            self.assertMeanWithinStandardErrors(
                covariance_at_offset(geometry, offset), products, comparisons=len(offsets)
            )
        self.assertAlmostEqual(variance_c_eps(geometry), covariance_at_offset(geometry, (0, 0)))


class ScalePathTest(PPhiTestCase):
    """Tests for the scale-decomposed GFF."""

    def test_single_interval(self):
        geometry = self.geometry(n=8)
        path = sample_scale_path(geometry, ScaleGrid((INFINITE_SCALE, 0.0)), 5)
        variance = covariance_increment_symbol(geometry, 0.0, INFINITE_SCALE)
        expected = gaussian_from_noise(white_noise(geometry, 5, "gff", 0, 0), variance)
        np.testing.assert_array_equal(expected, path.terminal.values)
        np.testing.assert_array_equal(np.zeros(geometry.shape), path.at(INFINITE_SCALE).values)

        np.testing.assert_array_equal(
            pv_covariance_symbol(geometry, INFINITE_SCALE), covariance_increment_symbol(geometry, 0, INFINITE_SCALE)
        )

    def test_telescoping(self):
        geometry = self.geometry(n=8)
        grid = ScaleGrid.geometric(0.5, 16.0, 0.01)
        for _, upper, lower in grid.interval_bounds():
            increment = covariance_increment_symbol(geometry, lower, upper)
            self.assertTrue(np.all(increment >= 0))
            if not math.isinf(upper):
                np.testing.assert_allclose(
                    pv_covariance_symbol(geometry, upper) - pv_covariance_symbol(geometry, lower),
                    increment,
                    atol=1e-15,
                )

    def test_increments(self):
        geometry = self.geometry(n=4, mass2=1.0)
        grid = ScaleGrid((INFINITE_SCALE, 2.0, 1.0, 0.0))
        paths = sample_paths(geometry, grid, 31, 4000)

        # zero mode of the increment over [1, 2]: ĉ₂ − ĉ₁ = 2/3 − 1/2
        zero_modes = np.array([path.increment(1).values.mean() for path in paths])
        self.assertMeanWithinStandardErrors(1 / 6, zero_modes**2, comparisons=3)

        first = np.array([path.increment(0).values[0, 0] for path in paths])
        second = np.array([path.increment(1).values[0, 0] for path in paths])
        self.assertMeanWithinStandardErrors(0.0, first * second, comparisons=3)

        terminal = np.array([path.terminal.values[1, 2] for path in paths])
        self.assertMeanWithinStandardErrors(variance_c_eps(geometry), terminal**2, comparisons=3)

    def test_y_field(self):
        geometry = self.geometry(n=4)
        grid = ScaleGrid((INFINITE_SCALE, 4.0, 0.5, 0.0))
        paths = sample_paths(geometry, grid, 77, 4000)

        path = paths[0]
        self.assertFieldsClose(RealField.zeros(geometry), y_field(path, 0.0))
        self.assertFieldsClose(path.terminal, y_field(path, INFINITE_SCALE))

        small = np.array([y_field(path, 0.5).values[0, 0] for path in paths])
        large = np.array([path.at(0.5).values[0, 0] for path in paths])
        self.assertMeanWithinStandardErrors(pointwise_variance_expected(geometry, 0.5), small**2, comparisons=2)
        self.assertMeanWithinStandardErrors(0.0, small * large, comparisons=2)

    def test_workers_do_not_change_paths(self):
        geometry = self.geometry(n=8)
        grid = ScaleGrid.geometric(0.5, 4.0, 0.25)
        serial = sample_paths(geometry, grid, 3, 6, workers=1)
        threaded = sample_paths(geometry, grid, 3, 6, workers=4)
        for first, second in zip(serial, threaded):
            for a, b in zip(first.fields, second.fields):
                np.testing.assert_array_equal(a.values, b.values)

    def test_path_validation(self):
        geometry = self.geometry(n=4)
        grid = ScaleGrid((INFINITE_SCALE, 0.0))
        with self.assertRaises(ScaleGridError):
            GffPath(geometry, grid, (RealField.zeros(geometry),))
        with self.assertRaises(ScaleGridError):
            GffPath(geometry, grid, (RealField.constant(geometry, 1.0), RealField.zeros(geometry)))

    def test_write_read(self):
        geometry = self.geometry(n=4)
        path = sample_scale_path(geometry, ScaleGrid.geometric(0.5, 2.0, 0.5), 12, replica=3)
        with tempfile.TemporaryDirectory() as directory:
            write_path(path, directory, compress=False)
            loaded = read_path(directory)
        self.assertEqual(path.grid, loaded.grid)
        self.assertEqual((12, 3), (loaded.seed, loaded.replica))
        for a, b in zip(path.fields, loaded.fields):
            np.testing.assert_array_equal(a.values, b.values)
