import argparse

from ...commands import PipelineCommand


class Command(PipelineCommand):
    help = "Evaluates the variational representation of −log E[e^{−v₀}] by open-loop and feedback drifts."

    pipeline = "variational"

    def add_arguments(self, parser: argparse.ArgumentParser):
        super().add_arguments(parser)
        parser.add_argument("--mode", choices=["open-loop", "feedback", "both"])
        parser.add_argument("--mc-inner", dest="mc_inner", type=int)
        parser.add_argument("--sgd-steps", dest="sgd_steps", type=int)
        parser.add_argument("--sgd-rate", dest="sgd_rate", type=float)
        parser.add_argument("--sgd-batch", dest="sgd_batch", type=int)
        parser.add_argument("--reference-batch", dest="reference_batch", type=int)

    def option_values(self, options):
        return {
            **super().option_values(options),
            "sampler.mc_inner": options["mc_inner"],
            "analysis.variational": options["mode"],
            "analysis.sgd_steps": options["sgd_steps"],
            "analysis.sgd_rate": options["sgd_rate"],
            "analysis.sgd_batch": options["sgd_batch"],
            "analysis.reference_batch": options["reference_batch"],
        }
