import csv
import gzip
import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import override_settings

from ...test import PPhiTestCase
from ..gff.sampling import sample_gff_batch
from ..lattice.io import write_field
from ..lattice.models import RealField
from .exceptions import DegenerateSampleError, DomainError, MaximaFormatError
from .fitting import cdf_table, gumbel_fit, levy_distance, location_mixture_gain
from .io import read_field_dumps, read_maxima, write_cdf_csv
from .maxima import (
    TAIL_RATE,
    centered_max,
    derivative_martingale,
    m_eps,
    max_records,
    summarize_records,
)
from .models import MaxRecord


class CenteringTest(PPhiTestCase):
    """Tests for the logarithmic centring of the maximum."""

    def test_value(self):
        self.assertAlmostEqual(2.8918, m_eps(1 / 64), delta=1e-3)
        log_inv = math.log(64)
        expected = (2 * log_inv - 0.75 * math.log(log_inv)) / math.sqrt(2 * math.pi)
        self.assertAlmostEqual(expected, m_eps(1 / 64), places=14)

    def test_increasing(self):
        values = [m_eps(2.0**-k) for k in range(4, 11)]
        self.assertTrue(all(b > a for a, b in zip(values, values[1:])))

    def test_leading_order(self):
        ratios = [m_eps(10.0**-k) / (2 * k * math.log(10) / math.sqrt(2 * math.pi)) for k in (2, 10, 50, 300)]
        self.assertTrue(all(b > a for a, b in zip(ratios, ratios[1:])))
        self.assertAlmostEqual(1.0, ratios[-1], delta=0.01)

    def test_domain(self):
        for epsilon in (0.5, math.exp(-1), 1.0, 0.0, -0.1):
            with self.assertRaises(DomainError):
                m_eps(epsilon)


class CenteredMaxTest(PPhiTestCase):
    """Tests for centred maxima of single fields."""

    def test_constant(self):
        geometry = self.geometry(n=16)
        record = centered_max(RealField.constant(geometry, 1.5))
        self.assertEqual(1.5, record.raw_max)
        self.assertAlmostEqual(1.5 - m_eps(1 / 16), record.centered, places=14)
        self.assertIsNone(record.z_statistic)

    def test_translation(self):
        f = self.random_field(self.geometry(n=16), 3)
        self.assertEqual(centered_max(f).centered, centered_max(f.translated((5, 11))).centered)

    def test_record_identity(self):
        with self.assertRaises(ValueError):
            MaxRecord(epsilon=0.1, raw_max=1.0, m_eps=0.5, centered=0.4)

    def test_batch(self):
        geometry = self.geometry(n=16)
        fields = sample_gff_batch(geometry, 5, 10)
        records = max_records(fields, geometry, start=20)
        self.assertEqual(list(range(20, 30)), [r.replica for r in records])
        for values, record in zip(fields, records):
            single = RealField(geometry, values)
            self.assertEqual(centered_max(single).centered, record.centered)
            self.assertAlmostEqual(derivative_martingale(single), record.z_statistic, places=12)
        self.assertEqual(
            [r.raw_max for r in records],
            [r.raw_max for r in max_records([RealField(geometry, v) for v in fields])],
        )

    def test_gff_band(self):
        means = []
        for n, batch in ((64, 500), (128, 250)):
            geometry = self.geometry(n=n)
            centered = np.concatenate(
                [
                    [r.centered for r in max_records(sample_gff_batch(geometry, 11, batch, start), geometry)]
                    for start in range(0, 2000, batch)
                ]
            )
            means.append(centered.mean())
        for mean in means:
            self.assertGreater(mean, -2.0)
            self.assertLess(mean, 2.0)
        self.assertLess(abs(means[0] - means[1]), 1.0)


class DerivativeMartingaleTest(PPhiTestCase):
    """Tests for the derivative martingale statistic."""

    def test_zero_field(self):
        for n in (8, 32):
            geometry = self.geometry(n=n)
            epsilon = 1 / n
            expected = 2 / math.sqrt(2 * math.pi) * math.log(n) * epsilon**2
            self.assertAlmostEqual(expected, derivative_martingale(RealField.zeros(geometry)), places=14)

    def test_constant_shift(self):
        geometry = self.geometry(n=16)
        f = self.random_field(geometry, 4, scale=0.3)
        # ε² Σ e^{−2 log(1/ε) + √(8π) f}, the exponential part of Z
        mass = float(np.sum(np.exp(TAIL_RATE * f.values))) / 16**4
        for c in (-0.4, 0.25, 1.0):
            shifted = derivative_martingale(f + RealField.constant(geometry, c))
            expected = math.exp(TAIL_RATE * c) * (derivative_martingale(f) - c * mass)
            self.assertAlmostEqual(1.0, shifted / expected, delta=1e-10)

    def test_explicit_epsilon(self):
        f = self.random_field(self.geometry(n=8), 5, scale=0.2)
        self.assertEqual(derivative_martingale(f), derivative_martingale(f, 1 / 8))
        with self.assertRaises(DomainError):
            derivative_martingale(f, 1.0)

    def test_gff_sweep(self):
        records = []
        for n in (32, 64):
            geometry = self.geometry(n=n)
            records += max_records(sample_gff_batch(geometry, 6, 200), geometry)
        summary = summarize_records(records)
        self.assertEqual([1 / 32, 1 / 64], list(summary))
        for entry in summary.values():
            self.assertEqual(200, entry["count"])
            self.assertTrue(math.isfinite(entry["z_mean"]["value"]))
            self.assertTrue(math.isfinite(entry["z_median"]))


class GumbelFitTest(PPhiTestCase):
    """Tests for maximum-likelihood Gumbel fits."""

    def test_synthetic(self):
        samples = np.random.default_rng(7).gumbel(0.0, 1.0, 100_000)
        fit = gumbel_fit(samples)
        self.assertAlmostEqual(0.0, fit.location, delta=0.02)
        self.assertAlmostEqual(1.0, fit.scale, delta=0.02)
        self.assertLess(fit.ks_distance, 0.01)
        self.assertEqual(100_000, fit.count)

    def test_location_equivariance(self):
        samples = np.random.default_rng(8).gumbel(0.3, 0.2, 500)
        fit = gumbel_fit(samples)
        shifted = gumbel_fit(samples + 3.7)
        self.assertAlmostEqual(fit.location + 3.7, shifted.location, delta=1e-9)
        self.assertAlmostEqual(fit.scale, shifted.scale, delta=1e-9)

    def test_likelihood_is_maximal(self):
        samples = np.random.default_rng(9).gumbel(-1.0, 0.5, 1000)
        fit = gumbel_fit(samples)
        for mu, beta in ((fit.location + 0.01, fit.scale), (fit.location, fit.scale * 1.01)):
            other = np.sum(-np.log(beta) - (samples - mu) / beta - np.exp(-(samples - mu) / beta))
            self.assertLess(other, fit.log_likelihood)

    def test_degenerate(self):
        with self.assertRaises(DegenerateSampleError):
            gumbel_fit(np.full(100, 2.0))
        with self.assertRaises(DegenerateSampleError):
            gumbel_fit(np.arange(10.0))
        with self.assertRaises(DegenerateSampleError):
            gumbel_fit(np.append(np.arange(100.0), math.nan))
        with override_settings(PPHI_GUMBEL_MIN_SAMPLES=5):
            self.assertEqual(10, gumbel_fit(np.arange(10.0)).count)

    def test_cdf_table(self):
        samples = np.random.default_rng(10).gumbel(0.0, 1.0, 200)
        table = cdf_table(samples, gumbel_fit(samples))
        self.assertEqual((200, 3), table.shape)
        self.assertTrue(np.all(np.diff(table[:, 0]) >= 0))
        self.assertTrue(np.all(np.diff(table[:, 2]) >= 0))
        self.assertEqual(1.0, table[-1, 1])
        self.assertTrue(np.all((table[:, 2] > 0) & (table[:, 2] < 1)))


class MixtureGainTest(PPhiTestCase):
    """Tests for the two-component location mixture."""

    def test_shifted_gumbel(self):
        rng = np.random.default_rng(11)
        samples = rng.gumbel(0.0, 0.2, 2000) - np.where(rng.random(2000) < 0.5, 0.0, 1.0)
        fit = location_mixture_gain(samples)
        self.assertGreater(fit.gain, 50.0)
        self.assertAlmostEqual(0.2, fit.scale, delta=0.03)
        self.assertAlmostEqual(1.0, abs(fit.locations[0] - fit.locations[1]), delta=0.1)

    def test_plain_gumbel(self):
        fit = location_mixture_gain(np.random.default_rng(12).gumbel(0.0, 0.2, 2000))
        self.assertGreaterEqual(fit.gain, 0.0)
        self.assertLess(fit.gain, 10.0)


class LevyDistanceTest(PPhiTestCase):
    """Tests for the Lévy distance of empirical laws."""

    def test_point_masses(self):
        self.assertAlmostEqual(0.3, levy_distance([0.0], [0.3]), delta=1e-9)
        self.assertAlmostEqual(1.0, levy_distance([0.0], [5.0]), delta=1e-9)

    def test_identical(self):
        samples = np.random.default_rng(13).standard_normal(300)
        self.assertEqual(0.0, levy_distance(samples, samples[::-1]))

    def test_shift(self):
        rng = np.random.default_rng(14)
        a, b = rng.standard_normal(400), rng.standard_normal(300)
        for c in (0.05, 0.2):
            distance = levy_distance(a, a + c)
            self.assertGreater(distance, 0.0)
            self.assertLessEqual(distance, c + 1e-9)
        self.assertAlmostEqual(levy_distance(a, b), levy_distance(b, a), delta=1e-9)

    def test_empty(self):
        with self.assertRaises(DegenerateSampleError):
            levy_distance([], [1.0])


class MaximaIoTest(PPhiTestCase):
    """Tests for reading maxima and writing CDF tables."""

    def test_jsonl(self):
        lines = [
            {"replica": 0, "statistic": "max", "value": 1.5, "epsilon": 0.125},
            {"replica": 0, "statistic": "l2", "value": 9.0},
            MaxRecord(epsilon=0.125, raw_max=2.0, m_eps=0.5, centered=1.5).as_json(),
        ]
        with tempfile.TemporaryDirectory() as directory:
            for name, opener in (("max.jsonl", open), ("max.jsonl.gz", gzip.open)):
                path = Path(directory) / name
                with opener(path, "wt", encoding="utf-8") as file:
                    file.write("\n".join(json.dumps(line) for line in lines) + "\n\n")
                values, epsilon = read_maxima(path)
                np.testing.assert_array_equal([1.5, 2.0], values)
                self.assertEqual(0.125, epsilon)

            path = Path(directory) / "mixed.jsonl"
            path.write_text('{"raw_max": 1, "epsilon": 0.1}\n{"raw_max": 2, "epsilon": 0.2}\n', encoding="utf-8")
            with self.assertRaises(MaximaFormatError):
                read_maxima(path)
            path.write_text("{not json\n", encoding="utf-8")
            with self.assertRaises(MaximaFormatError):
                read_maxima(path)

    def test_field_dumps(self):
        geometry = self.geometry(n=8)
        with tempfile.TemporaryDirectory() as directory:
            with self.assertRaises(MaximaFormatError):
                read_field_dumps(directory)
            for i in range(3):
                write_field(self.random_field(geometry, i), Path(directory) / f"field_{i:03d}.pphi", compress=i == 1)
            fields = read_field_dumps(directory)
            self.assertEqual(3, len(fields))
            self.assertFieldsClose(self.random_field(geometry, 2), fields[2], atol=0)

    def test_cdf_csv(self):
        table = np.array([[0.5, 0.5, 0.4], [1.25, 1.0, 0.75]])
        with tempfile.TemporaryDirectory() as directory:
            path = write_cdf_csv(table, Path(directory) / "cdf.csv")
            with open(path, "r", encoding="utf-8", newline="") as file:
                rows = list(csv.reader(file))
        self.assertEqual(["x", "empirical_cdf", "fitted_cdf"], rows[0])
        np.testing.assert_array_equal(table, np.array(rows[1:], dtype=np.float64))
