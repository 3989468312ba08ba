import csv
import gzip
import json
import math
import tempfile
from io import StringIO
from pathlib import Path
from unittest.mock import patch

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import override_settings

from ...exceptions import ConfigurationError, NumericalError
from ...test import PPhiTestCase
from ..extremes.maxima import m_eps
from ..flow.gaussian import quadratic_mode_variance, quadratic_scheme_variance
from ..gff.io import read_path
from ..lattice.io import read_field, write_field
from ..norms.spaces import lp_norm, sobolev_norm
from .commands import CONFIG_EXIT, NUMERICAL_EXIT
from .config import apply_overrides, load_config, parse_config, with_values
from .exceptions import ConfigFileError
from .models import RunManifest
from .outputs import MANIFEST_NAME, RunDirectory, StatisticsWriter, write_json_atomic
from .pipelines import PIPELINE_RUNNERS, run
from .seeds import derive_seed, rng_for
from .validation import (
    CHECKS,
    INNER_BIAS_ALLOWANCE,
    PRESETS,
    SCHEME_BIAS_LIMIT,
    CheckResult,
    _quadratic_grid,
    check_difference,
    check_spectral,
)
from .workers import map_replicas

QUARTIC = [0.0, 0.5, 0.0, 0.1]


def minimal_config(out_dir, **tables):
    data = {
        "pipeline": "sample",
        "seed": 11,
        "out_dir": str(out_dir),
        "model": {"n": 4, "poly": QUARTIC},
        "sampler": {"method": "polchinski", "replicas": 3, "mc_inner": 4},
    }
    for name, values in tables.items():
        data.setdefault(name, {}).update(values)
    return data


class SeedsTest(PPhiTestCase):
    """Tests for stream key derivation."""

    def test_deterministic(self):
        self.assertEqual(derive_seed(7, ("gff", 3, 0)), derive_seed(7, ("gff", 3, 0)))
        self.assertNotEqual(derive_seed(7, ("gff", 3, 0)), derive_seed(8, ("gff", 3, 0)))
        np.testing.assert_array_equal(rng_for(7, "x", 1).standard_normal(5), rng_for(7, "x", 1).standard_normal(5))

    def test_label_sensitivity(self):
        self.assertNotEqual(derive_seed(0, ("gff", 3, 0)), derive_seed(0, ("gff", 0, 3)))
        self.assertNotEqual(derive_seed(0, ("1",)), derive_seed(0, (1,)))
        self.assertNotEqual(derive_seed(0, ("ab", "c")), derive_seed(0, ("a", "bc")))
        self.assertNotEqual(derive_seed(0, ()), derive_seed(0, ("",)))

    def test_no_collisions(self):
        keys = {derive_seed(2024, ("gff", replica, 0)) for replica in range(10**6)}
        self.assertEqual(10**6, len(keys))

    def test_rejects_bad_input(self):
        for seed in (-1, 2**64, True, 1.5):
            with self.assertRaises(ConfigurationError):
                derive_seed(seed, ("gff",))
        with self.assertRaises(ConfigurationError):
            derive_seed(0, (0.5,))
        self.assertGreaterEqual(derive_seed(2**64 - 1, ("gff",)), 0)


class WorkersTest(PPhiTestCase):
    """Tests for replica scheduling."""

    def test_worker_invariance(self):
        def task(replica):
            return rng_for(3, "task", replica).standard_normal(16)

        serial = map_replicas(task, range(10), workers=1)
        threaded = map_replicas(task, range(10), workers=4)
        np.testing.assert_array_equal(np.stack(serial), np.stack(threaded))

    def test_order(self):
        self.assertEqual([25, 16, 9], map_replicas(lambda r: r * r, [5, 4, 3], workers=3))
        self.assertEqual([], map_replicas(lambda r: r, [], workers=2))


class ConfigTest(PPhiTestCase):
    """Tests for reading and validating run configurations."""

    def test_defaults(self):
        config = parse_config({"out_dir": "out", "model": {"n": 8}})

        self.assertEqual("sample", config.pipeline)
        self.assertEqual(0, config.seed)
        self.assertEqual(1.0, config.model.mass2)
        self.assertEqual((), config.model.poly)
        self.assertIsNone(config.model.cutoff_e)
        self.assertEqual(0.7, config.grid.rho)
        self.assertIsNone(config.grid.t_max)
        self.assertEqual("polchinski", config.sampler.method)
        self.assertEqual((0.0, 0.5, 1.0), config.analysis.alphas)
        self.assertFalse(config.analysis.extremes)
        self.assertFalse(config.analysis.dump_paths)

    def test_values(self):
        config = parse_config(
            {
                "pipeline": "coupling",
                "seed": 2**64 - 1,
                "out_dir": "out",
                "model": {"n": 16, "mass2": 2.0, "poly": "0, 0.5, 0, 0.1", "cutoff_e": "inf"},
                "grid": {"rho": 0.5, "tmax": 10.0, "tmin": 0.001},
                "sampler": {"replicas": 7, "common_random_numbers": True},
                "analysis": {"alphas": [0.25], "extremes": True},
            }
        )
        self.assertEqual(2**64 - 1, config.seed)
        self.assertEqual((0.0, 0.5, 0.0, 0.1), config.model.poly)
        self.assertTrue(math.isinf(config.model.cutoff_e))
        self.assertEqual(10.0, config.grid.t_max)
        self.assertEqual(7, config.sampler.replicas)
        self.assertTrue(config.sampler.common_random_numbers)
        self.assertEqual((0.25,), config.analysis.alphas)
        self.assertEqual(config.canonical(), parse_config(json.loads(config.canonical())).canonical())

    def test_errors(self):
        with self.assertRaises(ConfigFileError) as cm:
            parse_config(
                {
                    "out_dir": "out",
                    "colour": "red",
                    "model": {"n": 1, "mass2": -1.0, "poly": [0.0, 0.0, 1.0], "bogus": 1},
                    "grid": {"rho": 1.5, "tmax": 1.0, "tmin": 2.0},
                    "sampler": {"method": "hmc"},
                }
            )
        errors = cm.exception.errors
        for key in ("config", "model", "model.n", "model.mass2", "model.poly"):
            self.assertIn(key, errors)
        for key in ("grid.rho", "grid.tmin", "sampler.method"):
            self.assertIn(key, errors)
        self.assertIn("Unknown key 'colour'", errors["config"])

        with self.assertRaises(ConfigFileError) as cm:
            parse_config({"model": "n=4"})
        self.assertIn("out_dir", cm.exception.errors)
        self.assertIn("model", cm.exception.errors)
        with self.assertRaises(ConfigFileError):
            parse_config(["model"])

    def test_overrides(self):
        overrides = ["model.n=16", "seed=3", "sampler.method=mcmc", "model.poly=[0, 1]"]
        data = apply_overrides({"model": {"n": 4}}, overrides)
        self.assertEqual({"n": 16, "poly": [0, 1]}, data["model"])
        self.assertEqual(3, data["seed"])
        self.assertEqual({"method": "mcmc"}, data["sampler"])

        for bad in ("model.n", "=3", "a.b.c=1", "model.n=[1"):
            with self.assertRaises(ConfigFileError):
                apply_overrides({}, [bad])
        with self.assertRaises(ConfigFileError):
            apply_overrides({"model": 4}, ["model.n=1"])

        self.assertEqual({"model": {"n": 4}, "seed": 1}, with_values({"model": {"n": 4}}, {"seed": 1, "model.n": None}))

    def test_load_config(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "run.yaml"
            path.write_text("out_dir: out\nmodel:\n  n: 8\n  poly: [0, 0.5, 0, 0.1]\n", encoding="utf-8")
            config = load_config(path, ["grid.rho=0.5"])
            self.assertEqual(8, config.model.n)
            self.assertEqual(0.5, config.grid.rho)

            path.write_text("model: [unbalanced\n", encoding="utf-8")
            with self.assertRaises(ConfigFileError):
                load_config(path)
            path.write_text("- a list\n", encoding="utf-8")
            with self.assertRaises(ConfigFileError):
                load_config(path)
            with self.assertRaises(ConfigFileError):
                load_config(Path(directory) / "missing.yaml")


class OutputsTest(PPhiTestCase):
    """Tests for run directories and statistics streams."""

    def test_manifest(self):
        with tempfile.TemporaryDirectory() as directory:
            run_directory = RunDirectory(Path(directory) / "run", compress=False)
            manifest = RunManifest(config={"seed": 1}, version="0", started="now")
            run_directory.write_manifest(manifest)
            self.assertEqual("incomplete", run_directory.read_manifest()["status"])

            manifest.status = "complete"
            run_directory.write_manifest(manifest)
            self.assertEqual("complete", run_directory.read_manifest()["status"])
            self.assertEqual([MANIFEST_NAME], [p.name for p in run_directory.root.iterdir()])

            with self.assertRaises(TypeError):
                write_json_atomic({"bad": object()}, run_directory.root / "bad.json")
            self.assertEqual([MANIFEST_NAME], [p.name for p in run_directory.root.iterdir()])

    def test_statistics(self):
        records = [{"value": 1.5, "replica": 0, "statistic": "max"}, {"statistic": "max", "replica": 1, "value": -0.0}]
        with tempfile.TemporaryDirectory() as directory:
            with StatisticsWriter(Path(directory) / "plain.jsonl") as stream:
                stream.write_many(records)
            self.assertEqual(
                '{"replica":0,"statistic":"max","value":1.5}\n{"replica":1,"statistic":"max","value":-0.0}\n',
                (Path(directory) / "plain.jsonl").read_text(encoding="utf-8"),
            )

            for name in ("a.jsonl.gz", "b.jsonl.gz"):
                with StatisticsWriter(Path(directory) / name, compress=True) as stream:
                    stream.write_many(records)
            compressed = (Path(directory) / "a.jsonl.gz").read_bytes()
            self.assertEqual(compressed, (Path(directory) / "b.jsonl.gz").read_bytes())
            self.assertEqual((Path(directory) / "plain.jsonl").read_bytes(), gzip.decompress(compressed))


class RunTest(PPhiTestCase):
    """Tests for pipeline runs."""

    def run_in(self, directory, name, **tables):
        config = parse_config(minimal_config(Path(directory) / name, **tables))
        return config, run(config)

    def test_zero_polynomial(self):
        with tempfile.TemporaryDirectory() as directory:
            config, manifest = self.run_in(directory, "free", model={"poly": []}, analysis={"dump_fields": True})
            root = Path(config.out_dir)

            self.assertEqual("complete", manifest.status)
            self.assertEqual("inf", manifest.resolved["cutoff_e"])
            self.assertEqual(0.25, manifest.resolved["epsilon"])
            self.assertEqual(3, len(manifest.seeds))
            self.assertIn("statistics.jsonl", manifest.outputs)
            self.assertEqual("complete", RunDirectory(root).read_manifest()["status"])

            for replica in range(3):
                delta = read_field(root / "fields" / f"replica_{replica:06d}_delta.pphi")
                np.testing.assert_array_equal(np.zeros((4, 4)), delta.values)

            lines = [json.loads(line) for line in (root / "statistics.jsonl").read_text(encoding="utf-8").splitlines()]
            self.assertEqual(3 * 4, len(lines))
            self.assertEqual([0.0] * 3, [r["value"] for r in lines if r["statistic"] == "delta_sup"])
            self.assertEqual([0.0] * 3, [r["value"] for r in lines if r["statistic"] == "v0"])

    def test_coupling_paths(self):
        with tempfile.TemporaryDirectory() as directory:
            data = minimal_config(Path(directory) / "coupling", analysis={"dump_paths": True, "alphas": [0.0]})
            config = parse_config({**data, "pipeline": "coupling"})
            manifest = run(config)
            root = Path(config.out_dir)
            self.assertEqual("complete", manifest.status)

            for replica in range(3):
                paths = {
                    name: read_path(root / "paths" / f"replica_{replica:06d}" / name) for name in ("p", "gff", "delta")
                }
                self.assertEqual(replica, paths["p"].replica)
                self.assertEqual(11, paths["delta"].seed)
                self.assertEqual(paths["p"].grid, paths["gff"].grid)
                for p, gff, delta in zip(paths["p"].fields, paths["gff"].fields, paths["delta"].fields):
                    self.assertFieldsClose(gff, p - delta, atol=1e-9)
            with open(root / "paths" / "replica_000001" / "delta" / "manifest.json", "r", encoding="utf-8") as file:
                self.assertEqual("difference_path", json.load(file)["kind"])

            summary = json.loads((root / "coupling.json").read_text(encoding="utf-8"))
            self.assertIn("max_comparison", summary)
            self.assertGreaterEqual(summary["levy_distance"], 0.0)
            self.assertLessEqual(summary["levy_distance"], 1.0)

    def test_reproducible(self):
        with tempfile.TemporaryDirectory() as directory:
            with override_settings(PPHI_REPLICA_BATCH=2):
                serial = parse_config({**minimal_config(Path(directory) / "serial"), "workers": 1})
                run(serial)
                threaded = parse_config({**minimal_config(Path(directory) / "threaded"), "workers": 3})
                run(threaded)
            self.assertEqual(
                (Path(directory) / "serial" / "statistics.jsonl").read_bytes(),
                (Path(directory) / "threaded" / "statistics.jsonl").read_bytes(),
            )

            with override_settings(PPHI_COMPRESS=True):
                self.run_in(directory, "first", analysis={"extremes": True})
                self.run_in(directory, "second", analysis={"extremes": True})
            first = (Path(directory) / "first" / "statistics.jsonl.gz").read_bytes()
            self.assertEqual(first, (Path(directory) / "second" / "statistics.jsonl.gz").read_bytes())
            self.assertTrue((Path(directory) / "first" / "extremes.json").is_file())
            statistics = [json.loads(line)["statistic"] for line in gzip.decompress(first).splitlines()]
            self.assertEqual(3, statistics.count("centered_max"))

    def test_gff_and_mcmc(self):
        with tempfile.TemporaryDirectory() as directory:
            _, manifest = self.run_in(directory, "gff", sampler={"method": "gff", "replicas": 5})
            self.assertEqual(5, len(manifest.seeds))
            self.assertEqual(derive_seed(11, ("gff-terminal", 4)), manifest.seeds[4]["gff-terminal"])

            config, manifest = self.run_in(
                directory,
                "mcmc",
                sampler={"method": "mcmc", "chains": 2, "burn_in": 50, "n_samples": 20, "thin": 1},
            )
            self.assertEqual([0, 1], [s["chain"] for s in manifest.seeds])
            summary = json.loads((Path(config.out_dir) / "mcmc.json").read_text(encoding="utf-8"))
            self.assertEqual(2, len(summary["chains"]))
            self.assertEqual({"l2", "max", "v0"}, set(summary["pooled"]))

    def test_aborted(self):
        def fail(context, stream):
            raise NumericalError("importance weights underflowed")

        with tempfile.TemporaryDirectory() as directory:
            with patch.dict(PIPELINE_RUNNERS, {"sample": fail}):
                with self.assertRaises(NumericalError):
                    self.run_in(directory, "broken")
            manifest = RunDirectory(Path(directory) / "broken").read_manifest()

        self.assertEqual("aborted", manifest["status"])
        self.assertEqual({"type": "NumericalError", "message": "importance weights underflowed"}, manifest["error"])
        self.assertIsNotNone(manifest["finished"])
        self.assertIn("c_eps", manifest["resolved"])


class CommandsTest(PPhiTestCase):
    """Tests for the management commands."""

    def test_sample_gff(self):
        out = StringIO()
        with tempfile.TemporaryDirectory() as directory:
            call_command("sample_gff", "--n", "4", "--replicas", "3", "--out", directory, "--seed", "5", stdout=out)
            manifest = RunDirectory(directory).read_manifest()
            lines = (Path(directory) / "statistics.jsonl").read_text(encoding="utf-8").splitlines()

        self.assertEqual("complete", manifest["status"])
        self.assertEqual("gff", manifest["config"]["sampler"]["method"])
        self.assertEqual(5, manifest["config"]["seed"])
        self.assertEqual(9, len(lines))
        self.assertIn("Run complete", out.getvalue())

    def test_run_with_config_file(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "run.yaml"
            path.write_text(
                "pipeline: sample\nmodel:\n  n: 4\nsampler:\n  method: gff\n  replicas: 2\n", encoding="utf-8"
            )
            call_command("run", "--config", str(path), "--set", f"out_dir={directory}/out", stdout=StringIO())
            manifest = RunDirectory(Path(directory) / "out").read_manifest()
        self.assertEqual("complete", manifest["status"])
        self.assertEqual(2, manifest["config"]["sampler"]["replicas"])

    def test_exit_codes(self):
        with tempfile.TemporaryDirectory() as directory:
            with self.assertRaises(CommandError) as cm:
                call_command("sample_gff", "--n", "1", "--out", directory, stdout=StringIO())
            self.assertEqual(CONFIG_EXIT, cm.exception.returncode)

            with self.assertRaises(CommandError) as cm:
                call_command("sample_pphi", "--n", "4", "--set", "model.bogus=1", "--out", directory)
            self.assertEqual(CONFIG_EXIT, cm.exception.returncode)

            with self.assertRaises(CommandError) as cm:
                call_command("sample_gff", "--n", "4")
            self.assertEqual(CONFIG_EXIT, cm.exception.returncode)

            with patch("pphi.apps.harness.commands.run", side_effect=NumericalError("no finite weights")):
                with self.assertRaises(CommandError) as cm:
                    call_command("sample_pphi", "--n", "4", "--out", directory)
            self.assertEqual(NUMERICAL_EXIT, cm.exception.returncode)

    def test_extremes(self):
        epsilon = 1.0 / 64
        samples = m_eps(epsilon) + rng_for(1, "gumbel").gumbel(0.2, 1.0 / math.sqrt(8 * math.pi), 2000)
        with tempfile.TemporaryDirectory() as directory:
            with StatisticsWriter(Path(directory) / "statistics.jsonl") as stream:
                stream.write_many({"replica": i, "statistic": "max", "value": float(v)} for i, v in enumerate(samples))

            with self.assertRaises(CommandError) as cm:
                call_command("extremes", str(Path(directory) / "statistics.jsonl"), "--out", directory)
            self.assertEqual(CONFIG_EXIT, cm.exception.returncode)

            call_command(
                "extremes",
                str(Path(directory) / "statistics.jsonl"),
                "--n",
                "64",
                "--out",
                directory,
                stdout=StringIO(),
            )
            report = json.loads((Path(directory) / "extremes_fit.json").read_text(encoding="utf-8"))
            with open(Path(directory) / "extremes_cdf.csv", "r", encoding="utf-8", newline="") as file:
                rows = list(csv.reader(file))

        self.assertEqual(epsilon, report["epsilon"])
        self.assertEqual(2000, report["gumbel"]["count"])
        self.assertAlmostEqual(0.2, report["gumbel"]["mu"], delta=0.03)
        self.assertAlmostEqual(1.0 / math.sqrt(8 * math.pi), report["gumbel"]["beta"], delta=0.01)
        self.assertEqual(["x", "empirical_cdf", "fitted_cdf"], rows[0])
        self.assertEqual(2001, len(rows))

    def test_norms(self):
        geometry = self.geometry(n=8)
        f = self.random_field(geometry, seed=4)
        out = StringIO()
        with tempfile.TemporaryDirectory() as directory:
            path = write_field(f, Path(directory) / "field.pphi", compress=False)
            call_command(
                "norms", str(path), "--lp", "1,inf", "--alphas", "0.5", "--besov", "2,2,0.5", "--holder", "0.5",
                "--blocks", stdout=out,
            )
        report = json.loads(out.getvalue())

        self.assertEqual(8, report["n"])
        self.assertAlmostEqual(lp_norm(f, 1.0), report["lp"]["1.0"], places=12)
        self.assertAlmostEqual(np.abs(f.values).max(), report["lp"]["inf"], places=12)
        self.assertAlmostEqual(sobolev_norm(f, 0.5), report["h_alpha"]["0.5"], places=12)
        self.assertIn("2.0,2.0,0.5", report["besov"])
        self.assertGreater(report["holder"]["0.5"], 0.0)
        self.assertIn("-1", report["blocks"])

    def test_validate(self):
        passing = {"tiny": {"gumbel": {"draws": 100_000}, "spectral": {"n": 8}}}
        with patch.dict(PRESETS, passing):
            out = StringIO()
            with tempfile.TemporaryDirectory() as directory:
                call_command("validate", "--scale", "tiny", "--out", f"{directory}/results.json", stdout=out)
                results = json.loads((Path(directory) / "results.json").read_text(encoding="utf-8"))
        self.assertEqual([True, True], [r["passed"] for r in results])
        self.assertIn("PASS", out.getvalue())

        def fail(seed, workers, **parameters):
            return CheckResult("always failing", False, parameters)

        with patch.dict(PRESETS, passing), patch.dict(CHECKS, {"gumbel": fail}):
            with self.assertRaises(CommandError) as cm:
                call_command("validate", "--scale", "tiny", stdout=StringIO())
        self.assertEqual(1, cm.exception.returncode)


class ValidationTest(PPhiTestCase):
    """Tests for the built-in acceptance checks."""

    def test_spectral(self):
        result = check_spectral(0, 1, 8)
        self.assertTrue(result.passed, result.details)
        self.assertEqual("spectral identities", result.as_json()["name"])

    def test_presets(self):
        for preset in PRESETS.values():
            self.assertTrue(set(preset) <= set(CHECKS))

    def test_quadratic_grid(self):
        geometry = self.geometry(n=8)
        grid, bias = _quadratic_grid(geometry, 0.5, 0.5)
        self.assertGreater(grid.rho, 0.5)
        self.assertLessEqual(bias, SCHEME_BIAS_LIMIT)
        self.assertLess(SCHEME_BIAS_LIMIT, INNER_BIAS_ALLOWANCE)

        exact = quadratic_mode_variance(geometry, 0.5)
        scheme = quadratic_scheme_variance(geometry, 0.5, grid)
        self.assertAlmostEqual(bias, float(np.max(np.abs(scheme / exact - 1.0))))

    def test_difference(self):
        result = check_difference(0, 1, ns=[4, 8], replicas=30, mc_inner=8, rho=0.5)

        self.assertEqual([4, 8], [row["n"] for row in result.table])
        self.assertEqual({"h1_sup", "h1_terminal", "drift_action"}, set(result.details["spreads"]))
        for row in result.table:
            self.assertGreater(row["h1_sup"], 0.0)
            self.assertGreaterEqual(row["h1_sup"], row["h1_terminal"])
            self.assertTrue(row["continuity_decreasing"])
        json.dumps(result.as_json())
        self.assertEqual(2.0, result.details["sweep_factor"])
