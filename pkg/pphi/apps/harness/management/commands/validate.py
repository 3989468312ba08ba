import argparse
import json
from pathlib import Path

from django.core.management.base import CommandError

from ...commands import PPhiCommand
from ...outputs import write_json_atomic
from ...validation import PRESETS, validate


class Command(PPhiCommand):
    help = "Runs the built-in acceptance checks and prints a pass/fail table."

    def add_arguments(self, parser: argparse.ArgumentParser):
        parser.add_argument("--scale", choices=sorted(PRESETS), default="quick")
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--workers", type=int)
        parser.add_argument("--out", help="write the full results to this JSON file")

    def perform(self, *args, **options):
        results = validate(options["scale"], options["seed"], options["workers"])

        for result in results:
            style = self.style.SUCCESS if result.passed else self.style.ERROR
            self.stdout.write(f"{'PASS' if result.passed else 'FAIL'}  {result.name}", style_func=style)
            for row in result.table:
                if "flow" in row:
                    flow, mcmc = row["flow"], row["mcmc"]
                    self.stdout.write(
                        f"      {row['statistic']:>4}  flow {flow['value']:.6g} ± {flow['stderr']:.2g}"
                        f"  mcmc {mcmc['value']:.6g} ± {mcmc['stderr']:.2g}  z={row['z']:.2f}"
                    )
                elif "h1_sup" in row:
                    self.stdout.write(
                        f"      n={row['n']:<4} H¹ sup {row['h1_sup']:.4g}  at 0 {row['h1_terminal']:.4g}"
                        f"  action {row['drift_action']['value']:.4g}"
                        f"  continuity {'decreasing' if row['continuity_decreasing'] else 'NOT decreasing'}"
                    )

        if options["out"]:
            path = write_json_atomic([r.as_json() for r in results], Path(options["out"]))
            self.stdout.write(f"Wrote {path}")
        else:
            self.stdout.write(json.dumps([r.as_json() for r in results], indent=2, sort_keys=True, default=str))

        failed = [r.name for r in results if not r.passed]
        if failed:
            raise CommandError(f"{len(failed)} check(s) failed: {', '.join(failed)}", returncode=1)
