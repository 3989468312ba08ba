import argparse

from ...commands import PipelineCommand


class Command(PipelineCommand):
    help = "Samples the cut-off P(φ)₂ field by the Polchinski flow coupling or by MALA."

    def add_arguments(self, parser: argparse.ArgumentParser):
        super().add_arguments(parser)
        parser.add_argument("--method", choices=["polchinski", "mcmc"], default="polchinski")
        parser.add_argument("--mc-inner", dest="mc_inner", type=int)
        parser.add_argument("--chains", type=int)
        parser.add_argument("--n-samples", dest="n_samples", type=int)
        parser.add_argument("--burn-in", dest="burn_in", type=int)
        parser.add_argument("--thin", type=int)
        parser.add_argument("--step", type=float)

    def option_values(self, options):
        return {
            **super().option_values(options),
            "sampler.method": options["method"],
            "sampler.mc_inner": options["mc_inner"],
            "sampler.chains": options["chains"],
            "sampler.n_samples": options["n_samples"],
            "sampler.burn_in": options["burn_in"],
            "sampler.thin": options["thin"],
            "sampler.step": options["step"],
        }
