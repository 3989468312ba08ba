"""Scale paths on disk: a directory of ``scale_NNN.pphi`` dumps and a manifest."""

import json
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

from ..lattice.io import FIELD_SUFFIX, read_field, write_field
from ..lattice.models import LatticeGeometry, RealField
from .exceptions import ScaleGridError
from .models import GffPath, ScaleGrid

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"

# Manifest kinds read_path accepts; every one of them vanishes at t = ∞.
PATH_KINDS = ("gff_path", "polchinski_path", "difference_path")


def scale_file_name(index: int) -> str:
    return f"scale_{index:03d}{FIELD_SUFFIX}"


def write_scale_fields(
    fields: Sequence[RealField],
    grid: ScaleGrid,
    directory: Union[str, Path],
    kind: str = "gff_path",
    seed: int = 0,
    replica: int = 0,
    compress: Optional[bool] = None,
) -> Path:
    """Dump one field per grid time, together with a manifest naming the path kind."""
    if kind not in PATH_KINDS:
        raise ScaleGridError(f"unknown path kind {kind!r}")
    if len(fields) != len(grid.times):
        raise ScaleGridError(f"path has {len(fields)} fields for {len(grid.times)} grid times")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for index, field in enumerate(fields):
        write_field(field, directory / scale_file_name(index), compress)

    geometry = fields[0].geometry
    manifest = {
        "kind": kind,
        "n": geometry.n,
        "mass2": geometry.mass2,
        "times": grid.as_json(),
        "seed": seed,
        "replica": replica,
    }
    with open(directory / MANIFEST_NAME, "w", encoding="utf-8") as file:
        json.dump(manifest, file, indent=2, sort_keys=True)
    logger.debug("Wrote %d-scale %s to %s", len(fields), kind, directory)
    return directory


def write_path(path: GffPath, directory: Union[str, Path], compress: Optional[bool] = None) -> Path:
    return write_scale_fields(path.fields, path.grid, directory, "gff_path", path.seed, path.replica, compress)


def read_path(directory: Union[str, Path]) -> GffPath:
    """Read any dumped scale path back; the kind only decides which field the dumps hold."""
    directory = Path(directory)
    with open(directory / MANIFEST_NAME, "r", encoding="utf-8") as file:
        manifest = json.load(file)
    if manifest.get("kind", "gff_path") not in PATH_KINDS:
        raise ScaleGridError(f"{directory} does not hold a scale path")

    geometry = LatticeGeometry(n=int(manifest["n"]), mass2=float(manifest["mass2"]))
    grid = ScaleGrid.from_json(manifest["times"])
    fields = tuple(read_field(directory / scale_file_name(i)) for i in range(len(grid.times)))
    if any(f.geometry != geometry for f in fields):
        raise ScaleGridError(f"field dumps in {directory} do not match the manifest geometry")
    return GffPath(
        geometry=geometry,
        grid=grid,
        fields=fields,
        seed=int(manifest["seed"]),
        replica=int(manifest.get("replica", 0)),
    )
