import argparse
import json
from pathlib import Path
from typing import Optional

from .....exceptions import ConfigurationError
from ....extremes.fitting import cdf_table, gumbel_fit, location_mixture_gain
from ....extremes.io import read_field_dumps, read_maxima, write_cdf_csv
from ....extremes.maxima import m_eps, max_records, summarize_records
from ...commands import PPhiCommand
from ...outputs import MANIFEST_NAME, write_json_atomic


def manifest_epsilon(source: Path) -> Optional[float]:
    """The lattice spacing recorded by the run that wrote `source`, if any."""
    path = source.parent / MANIFEST_NAME
    if not path.is_file():
        return None
    with open(path, "r", encoding="utf-8") as file:
        return json.load(file).get("resolved", {}).get("epsilon")


class Command(PPhiCommand):
    help = "Fits a Gumbel law to centred maxima read from a statistics stream or a directory of field dumps."

    def add_arguments(self, parser: argparse.ArgumentParser):
        parser.add_argument("source", help="JSON Lines statistics file or directory of field dumps")
        parser.add_argument("--epsilon", type=float, help="lattice spacing, if the run did not record it")
        parser.add_argument("--n", type=int, help="lattice points per side, instead of --epsilon")
        parser.add_argument("--statistic", default="max", help="statistic name of the raw maxima")
        parser.add_argument("--pattern", default="*", help='dump file pattern, such as "*_p.pphi*"')
        parser.add_argument("--out", default=".", help="directory for the fit report and the CDF table")
        parser.add_argument("--prefix", default="extremes")

    def perform(self, *args, **options):
        source = Path(options["source"])
        report = {"source": str(source)}
        if source.is_dir():
            records = max_records(read_field_dumps(source, options["pattern"]))
            centered = [r.centered for r in records]
            report["summary"] = {repr(eps): entry for eps, entry in summarize_records(records).items()}
        else:
            raw, epsilon = read_maxima(source, options["statistic"])
            if options["epsilon"] is not None:
                epsilon = options["epsilon"]
            elif options["n"] is not None:
                epsilon = 1.0 / options["n"]
            elif epsilon is None:
                epsilon = manifest_epsilon(source)
            if epsilon is None:
                raise ConfigurationError(f"{source} does not record the lattice spacing; pass --epsilon or --n")
            report["epsilon"] = epsilon
            report["m_eps"] = m_eps(epsilon)
            centered = list(raw - report["m_eps"])

        fit = gumbel_fit(centered)
        report["gumbel"] = fit.as_json()
        report["mixture"] = location_mixture_gain(centered).as_json()

        out = Path(options["out"])
        out.mkdir(parents=True, exist_ok=True)
        json_path = write_json_atomic(report, out / f"{options['prefix']}_fit.json")
        csv_path = write_cdf_csv(cdf_table(centered, fit), out / f"{options['prefix']}_cdf.csv")

        self.stdout.write(
            f"Gumbel fit of {fit.count} centred maxima: mu={fit.location:.6g}, beta={fit.scale:.6g}, "
            f"KS={fit.ks_distance:.4g}",
            style_func=self.style.SUCCESS,
        )
        self.stdout.write(f"Wrote {json_path} and {csv_path}")
