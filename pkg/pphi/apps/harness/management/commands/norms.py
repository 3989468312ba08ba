import argparse
import json
import math

from ....lattice.io import read_field
from ....norms.exceptions import NormParameterError
from ....norms.models import DyadicPartition
from ....norms.spaces import besov_norm, holder_norm, lp_block, lp_norm, sobolev_norm
from ...commands import PPhiCommand, float_list


class Command(PPhiCommand):
    help = "Prints Lᵖ, Sobolev, Besov and Hölder norms of a field dump as JSON."

    def add_arguments(self, parser: argparse.ArgumentParser):
        parser.add_argument("field", help="field dump (.pphi or .pphi.gz)")
        parser.add_argument("--lp", dest="exponents", type=float_list, default=[2.0, math.inf], help="Lᵖ exponents")
        parser.add_argument("--alphas", type=float_list, default=[-1.0, 0.0, 0.5, 1.0])
        parser.add_argument("--besov", type=float_list, action="append", default=[], metavar="P,Q,ALPHA")
        parser.add_argument("--holder", type=float_list, help="Hölder exponents in (0, 1)")
        parser.add_argument("--blocks", action="store_true", help="also print the L² norm of every block")

    def perform(self, *args, **options):
        f = read_field(options["field"])
        report = {
            "n": f.geometry.n,
            "mass2": f.geometry.mass2,
            "lp": {repr(p): lp_norm(f, p) for p in options["exponents"]},
            "h_alpha": {repr(alpha): sobolev_norm(f, alpha) for alpha in options["alphas"]},
        }
        besov = {}
        for triple in options["besov"]:
            if len(triple) != 3:
                raise NormParameterError(f"--besov takes P,Q,ALPHA, got {triple}")
            p, q, alpha = triple
            besov[f"{p!r},{q!r},{alpha!r}"] = besov_norm(f, p, q, alpha)
        if besov:
            report["besov"] = besov
        if options["holder"]:
            report["holder"] = {repr(alpha): holder_norm(f, alpha) for alpha in options["holder"]}
        if options["blocks"]:
            partition = DyadicPartition.for_geometry(f.geometry)
            report["blocks"] = {j: lp_norm(lp_block(f, j, partition), 2.0) for j in partition.indices}

        self.stdout.write(json.dumps(report, indent=2, sort_keys=True))
