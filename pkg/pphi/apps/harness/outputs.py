"""Run directories: the manifest, JSON Lines statistics, summaries and field dumps."""

import gzip
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import IO, Any, Iterable, Mapping, Optional, Union

import numpy as np
from django.conf import settings

from ..lattice.io import FIELD_SUFFIX, write_field
from ..lattice.models import RealField
from .models import RunManifest

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
FIELDS_DIRECTORY = "fields"


def _builtin(value: Any) -> Any:
    if isinstance(value, (np.generic, np.ndarray)):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _dumps(record: Mapping[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=True, default=_builtin)


def write_json_atomic(data: Any, path: Union[str, Path]) -> Path:
    """Write JSON through a temporary file and a rename, so readers never see half a file."""
    path = Path(path)
    handle, temporary = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(handle, "w", encoding="utf-8") as file:
            json.dump(data, file, indent=2, sort_keys=True, default=_builtin)
            file.write("\n")
            file.flush()
            os.fsync(file.fileno())
        os.replace(temporary, path)
    except BaseException:
        Path(temporary).unlink(missing_ok=True)
        raise
    return path


class StatisticsWriter:
    """
    Append-only JSON Lines stream, one record per line with sorted keys.

    Compressed streams carry no timestamp or file name in the gzip header, so
    equal records give byte-identical files.
    """

    def __init__(self, path: Union[str, Path], compress: bool = False):
        self.path = Path(path)
        self._raw: IO[bytes] = open(self.path, "wb")
        self._stream: IO[bytes] = (
            gzip.GzipFile(filename="", mode="wb", fileobj=self._raw, mtime=0) if compress else self._raw
        )
        self.count = 0

    def write(self, record: Mapping[str, Any]):
        self._stream.write((_dumps(record) + "\n").encode("utf-8"))
        self.count += 1

    def write_many(self, records: Iterable[Mapping[str, Any]]):
        for record in records:
            self.write(record)
        self._stream.flush()

    def close(self):
        if self._stream is not self._raw:
            self._stream.close()
        self._raw.close()

    def __enter__(self) -> "StatisticsWriter":
        return self

    def __exit__(self, *exc_info):
        self.close()


class RunDirectory:
    """The output directory of one run."""

    def __init__(self, root: Union[str, Path], compress: Optional[bool] = None):
        self.root = Path(root)
        self.compress = settings.PPHI_COMPRESS if compress is None else compress
        self.root.mkdir(parents=True, exist_ok=True)

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def write_manifest(self, manifest: RunManifest) -> Path:
        return write_json_atomic(manifest.as_json(), self.manifest_path)

    def read_manifest(self) -> dict:
        with open(self.manifest_path, "r", encoding="utf-8") as file:
            return json.load(file)

    def statistics(self, name: str = "statistics") -> StatisticsWriter:
        suffix = ".jsonl.gz" if self.compress else ".jsonl"
        return StatisticsWriter(self.root / f"{name}{suffix}", self.compress)

    def write_summary(self, name: str, data: Any) -> Path:
        return write_json_atomic(data, self.root / f"{name}.json")

    def write_field(self, f: RealField, name: str) -> Path:
        directory = self.root / FIELDS_DIRECTORY
        directory.mkdir(exist_ok=True)
        return write_field(f, directory / f"{name}{FIELD_SUFFIX}", self.compress)
