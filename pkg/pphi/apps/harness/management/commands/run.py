import argparse

from ...commands import PipelineCommand


class Command(PipelineCommand):
    help = "Runs the pipeline named in a YAML configuration file."

    def add_arguments(self, parser: argparse.ArgumentParser):
        parser.add_argument("--config", required=True, help="YAML run configuration")
        parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides")

    def option_values(self, options):
        return {}
