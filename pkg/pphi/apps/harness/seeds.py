"""Seed derivation and random streams.

Every random draw in the toolkit comes from a stream keyed by
``derive_seed(master, labels)``. The derivation is a keyed BLAKE2b digest of
a canonical, type-tagged, length-prefixed encoding of the labels, so it is
stable across versions and platforms and distinct label lists give
independent keys. Streams are Philox generators; the position within a
stream indexes lattice sites or modes, so a draw is fully determined by
(master, labels, offset) and not by scheduling.
"""

import hashlib
import struct
from typing import Iterable, Union

import numpy as np

from ...exceptions import ConfigurationError

Label = Union[str, int]

MAX_SEED = 2**64 - 1


def check_seed(master: int) -> int:
    if isinstance(master, bool) or not isinstance(master, (int, np.integer)):
        raise ConfigurationError(f"seed must be an integer, got {master!r}")
    if not 0 <= int(master) <= MAX_SEED:
        raise ConfigurationError(f"seed must lie in [0, 2^64), got {master}")
    return int(master)


def _encode(label: Label) -> bytes:
    if isinstance(label, bool) or not isinstance(label, (str, int, np.integer)):
        raise ConfigurationError(f"seed labels must be strings or integers, got {label!r}")
    if isinstance(label, str):
        payload = label.encode("utf-8")
        tag = b"s"
    else:
        payload = str(int(label)).encode("ascii")
        tag = b"i"
    return tag + struct.pack("<I", len(payload)) + payload


def derive_seed(master: int, labels: Iterable[Label]) -> int:
    """Derive a 64-bit stream key from the master seed and an ordered label list."""
    digest = hashlib.blake2b(key=struct.pack("<Q", check_seed(master)), digest_size=8)
    for label in labels:
        digest.update(_encode(label))
    return int.from_bytes(digest.digest(), "little")


def rng_for(master: int, *labels: Label) -> np.random.Generator:
    """A fresh counter-based generator for the stream (master, labels)."""
    return np.random.Generator(np.random.Philox(key=derive_seed(master, labels)))
