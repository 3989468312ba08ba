import argparse

from ...commands import PipelineCommand, float_list


class Command(PipelineCommand):
    help = "Runs the flow coupling and reports difference-field, independence and maximum diagnostics."

    pipeline = "coupling"

    def add_arguments(self, parser: argparse.ArgumentParser):
        super().add_arguments(parser)
        parser.add_argument("--mc-inner", dest="mc_inner", type=int)
        parser.add_argument("--alphas", type=float_list)
        parser.add_argument("--moment-exponents", dest="moment_exponents", type=float_list)

    def option_values(self, options):
        return {
            **super().option_values(options),
            "sampler.method": "polchinski",
            "sampler.mc_inner": options["mc_inner"],
            "analysis.alphas": options["alphas"],
            "analysis.moment_exponents": options["moment_exponents"],
        }
