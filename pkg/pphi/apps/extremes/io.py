"""Reading maxima back from run outputs and writing CDF tables."""

import csv
import gzip
import json
import logging
from pathlib import Path
from typing import IO, List, Optional, Tuple, Union

import numpy as np

from ..lattice.io import FIELD_SUFFIX, read_field
from ..lattice.models import RealField
from .exceptions import MaximaFormatError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CDF_HEADER = ("x", "empirical_cdf", "fitted_cdf")


def _open_text(path: Path) -> IO[str]:
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def read_maxima(path: PathLike, statistic: str = "max") -> Tuple[np.ndarray, Optional[float]]:
    """
    Raw maxima from a JSON Lines file.

    Lines are either max records (with a ``raw_max`` key) or statistic
    records whose ``statistic`` equals `statistic`; other lines are skipped.
    Return the maxima and the lattice spacing if the file records one.
    """
    path = Path(path)
    values: List[float] = []
    epsilons = set()
    with _open_text(path) as file:
        for number, line in enumerate(file, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as ex:
                raise MaximaFormatError(f"{path}:{number}: {ex.msg}") from ex
            if "raw_max" in record:
                values.append(float(record["raw_max"]))
            elif record.get("statistic") == statistic:
                values.append(float(record["value"]))
            else:
                continue
            if record.get("epsilon") is not None:
                epsilons.add(float(record["epsilon"]))

    if len(epsilons) > 1:
        raise MaximaFormatError(f"{path} mixes lattice spacings {sorted(epsilons)}")
    logger.debug("Read %d maxima from %s", len(values), path)
    return np.array(values), (epsilons.pop() if epsilons else None)


def read_field_dumps(directory: PathLike, pattern: str = "*") -> List[RealField]:
    """Every field dump in `directory` whose name matches `pattern`, in file-name order."""
    directory = Path(directory)
    paths = sorted(p for p in directory.glob(pattern) if p.name.endswith((FIELD_SUFFIX, FIELD_SUFFIX + ".gz")))
    if not paths:
        raise MaximaFormatError(f"no field dumps in {directory}")
    fields = [read_field(p) for p in paths]
    if any(f.geometry != fields[0].geometry for f in fields):
        raise MaximaFormatError(f"field dumps in {directory} have different geometries")
    return fields


def write_cdf_csv(table: np.ndarray, path: PathLike) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file)
        writer.writerow(CDF_HEADER)
        for row in table:
            writer.writerow([repr(float(v)) for v in row])
    return path
