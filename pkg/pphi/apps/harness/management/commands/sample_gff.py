from ...commands import PipelineCommand


class Command(PipelineCommand):
    help = "Samples the massive lattice GFF and streams per-replica statistics."

    def option_values(self, options):
        return {**super().option_values(options), "sampler.method": "gff"}
