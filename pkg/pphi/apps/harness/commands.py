"""Shared plumbing of the management commands."""

import argparse
from typing import Any, Dict, Optional

from django.core.management.base import BaseCommand, CommandError

from ...exceptions import ConfigurationError, NumericalError
from .config import apply_overrides, parse_config, read_config_file, with_values
from .models import RunConfig, RunManifest
from .pipelines import run

CONFIG_EXIT = 2
NUMERICAL_EXIT = 3


def float_list(value: str):
    try:
        return [float(item) for item in value.split(",") if item.strip()]
    except ValueError as ex:
        raise argparse.ArgumentTypeError(f"{value!r} is not a comma-separated list of numbers") from ex


class PPhiCommand(BaseCommand):
    """A command whose toolkit errors become exit status 2 (input) or 3 (numerics)."""

    def handle(self, *args, **options):
        try:
            return self.perform(*args, **options)
        except ConfigurationError as ex:
            raise CommandError(str(ex), returncode=CONFIG_EXIT) from ex
        except NumericalError as ex:
            raise CommandError(f"numerical abort: {ex}", returncode=NUMERICAL_EXIT) from ex

    def perform(self, *args, **options):
        raise NotImplementedError


class PipelineCommand(PPhiCommand):
    """
    Runs one pipeline from an optional YAML file plus command-line flags.

    Flags win over the file, and ``--set table.key=value`` wins over both.
    """

    pipeline = "sample"

    def add_arguments(self, parser: argparse.ArgumentParser):
        parser.add_argument("--config", help="YAML run configuration")
        parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides")
        parser.add_argument("--out", dest="out_dir", help="output directory")
        parser.add_argument("--seed", type=int)
        parser.add_argument("--workers", type=int)
        parser.add_argument("--n", type=int, help="lattice points per side (ε = 1/n)")
        parser.add_argument("--mass2", type=float)
        parser.add_argument("--poly", type=float_list, help="coefficients a_1,...,a_N of :P:")
        parser.add_argument("--cutoff-e", dest="cutoff_e", help='energy cut-off E, "auto" or "inf"')
        parser.add_argument("--rho", type=float)
        parser.add_argument("--tmax")
        parser.add_argument("--replicas", type=int)
        parser.add_argument("--extremes", action="store_true", default=None)
        parser.add_argument("--dump-fields", dest="dump_fields", action="store_true", default=None)
        parser.add_argument(
            "--dump-paths",
            dest="dump_paths",
            action="store_true",
            default=None,
            help="write the Φ^P, Φ^GFF and Φ^Δ paths of every replica",
        )

    def option_values(self, options: Dict[str, Any]) -> Dict[str, Any]:
        """Dotted configuration keys set by this command's flags."""
        return {
            "pipeline": self.pipeline,
            "out_dir": options["out_dir"],
            "seed": options["seed"],
            "workers": options["workers"],
            "model.n": options["n"],
            "model.mass2": options["mass2"],
            "model.poly": options["poly"],
            "model.cutoff_e": options["cutoff_e"],
            "grid.rho": options["rho"],
            "grid.tmax": options["tmax"],
            "sampler.replicas": options["replicas"],
            "analysis.extremes": options["extremes"],
            "analysis.dump_fields": options["dump_fields"],
            "analysis.dump_paths": options["dump_paths"],
        }

    def build_config(self, options: Dict[str, Any]) -> RunConfig:
        data = read_config_file(options["config"]) if options.get("config") else {}
        data = with_values(data, self.option_values(options))
        return parse_config(apply_overrides(data, options["overrides"]))

    def report(self, manifest: RunManifest, config: Optional[RunConfig] = None):
        resolved = manifest.resolved
        self.stdout.write(
            f"Resolved E={resolved.get('cutoff_e')}, c_eps={resolved.get('c_eps'):.6g}, "
            f"t_max={resolved.get('t_max'):.6g}, t_min={resolved.get('t_min'):.6g}"
        )
        for name in manifest.outputs:
            self.stdout.write(f"  {name}")
        self.stdout.write(
            f"Run complete in {manifest.elapsed:.1f} s; outputs in {manifest.config['out_dir']}",
            style_func=self.style.SUCCESS,
        )

    def perform(self, *args, **options):
        config = self.build_config(options)
        manifest = run(config)
        self.report(manifest, config)
