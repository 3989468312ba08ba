"""Binary field dumps.

Layout (all little-endian): magic ``PPHI``, format version (u16), n (u32),
mass2 (f64), then n² f64 values in row-major order. Files ending in ``.gz``
are gzip-compressed.
"""

import gzip
import logging
import struct
from pathlib import Path
from typing import BinaryIO, Optional, Union

import numpy as np
from django.conf import settings

from .exceptions import FieldFormatError, GeometryError
from .models import LatticeGeometry, RealField

logger = logging.getLogger(__name__)

MAGIC = b"PPHI"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHId")
FIELD_SUFFIX = ".pphi"

PathLike = Union[str, Path]


def field_path(path: PathLike, compress: Optional[bool] = None) -> Path:
    """The on-disk name of a dump, with ``.gz`` appended when compression is on."""
    path = Path(path)
    if compress is None:
        compress = settings.PPHI_COMPRESS
    if compress and path.suffix != ".gz":
        return path.with_name(path.name + ".gz")
    return path


def _open(path: Path, mode: str) -> BinaryIO:
    if path.suffix == ".gz":
        return gzip.open(path, mode)  # type: ignore
    return open(path, mode)  # pylint: disable=consider-using-with


def dump_field(f: RealField) -> bytes:
    header = HEADER.pack(MAGIC, FORMAT_VERSION, f.geometry.n, f.geometry.mass2)
    return header + f.values.astype("<f8").tobytes(order="C")


def load_field(data: bytes) -> RealField:
    if len(data) < HEADER.size:
        raise FieldFormatError(f"truncated header ({len(data)} bytes)")
    magic, version, n, mass2 = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FieldFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FieldFormatError(f"unsupported format version {version}")

    expected = HEADER.size + 8 * n * n
    if len(data) != expected:
        raise FieldFormatError(f"expected {expected} bytes for n={n}, got {len(data)}")

    try:
        geometry = LatticeGeometry(n=n, mass2=mass2)
        values = np.frombuffer(data, dtype="<f8", offset=HEADER.size)
        return RealField(geometry, values.astype(np.float64))
    except GeometryError as ex:
        raise FieldFormatError(str(ex)) from ex


def write_field(f: RealField, path: PathLike, compress: Optional[bool] = None) -> Path:
    """Write `f` to `path`; returns the path actually written."""
    target = field_path(path, compress)
    target.parent.mkdir(parents=True, exist_ok=True)
    with _open(target, "wb") as file:
        file.write(dump_field(f))
    logger.debug("Wrote %dx%d field to %s", f.geometry.n, f.geometry.n, target)
    return target


def read_field(path: PathLike) -> RealField:
    path = Path(path)
    if not path.exists() and path.with_name(path.name + ".gz").exists():
        path = path.with_name(path.name + ".gz")
    with _open(path, "rb") as file:
        return load_field(file.read())
