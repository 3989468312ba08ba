import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

import numpy as np

from ..lattice.models import LatticeGeometry
from ..lattice.spectral import dual_frequencies
from .exceptions import BlockIndexError

# The radial profile θ equals 1 on [0, INNER] and vanishes on [OUTER, ∞).
INNER = 3.0 / 4.0
OUTER = 4.0 / 3.0


def _flat_exp(t: np.ndarray) -> np.ndarray:
    """exp(−1/t) for t > 0 and 0 otherwise; C^∞ with all derivatives 0 at 0."""
    safe = np.where(t > 0, t, 1.0)
    return np.where(t > 0, np.exp(-1.0 / safe), 0.0)


def smooth_step(r: np.ndarray) -> np.ndarray:
    """θ(r): a C^∞ step from 1 (r ≤ 3/4) to 0 (r ≥ 4/3)."""
    u = (np.asarray(r, dtype=np.float64) - INNER) / (OUTER - INNER)
    rising = _flat_exp(u)
    falling = _flat_exp(1.0 - u)
    return falling / (falling + rising)


def max_norm_frequency(geometry: LatticeGeometry) -> np.ndarray:
    k1, k2 = dual_frequencies(geometry)
    return np.maximum(np.abs(k1), np.abs(k2))


def top_block_index(geometry: LatticeGeometry) -> int:
    """j_ε: the largest j whose annulus 2^j·[3/8, 4/3] fits below the Nyquist frequency πn."""
    return int(math.floor(math.log2(math.pi * geometry.n / OUTER) - 1e-12))


@dataclass(frozen=True)
class DyadicPartition:
    """
    Represents a smooth dyadic partition of unity χ_{−1}, χ_0, …, χ_{j_ε} on Ω_ε*.

    χ_{−1}(k) = θ(2r) and χ_j(k) = θ(2^{−j} r) − θ(2^{1−j} r) for 0 ≤ j < j_ε,
    with r = max_i |k_i|; the top block is the complement of the others.
    Block j (0 ≤ j < j_ε) is supported in 2^j·[3/8, 4/3] and equals 1 on
    2^j·[2/3, 3/4].
    """

    geometry: LatticeGeometry
    blocks: Tuple[np.ndarray, ...] = field(repr=False)

    @classmethod
    def for_geometry(cls, geometry: LatticeGeometry) -> "DyadicPartition":
        return _partition(geometry)

    @property
    def top(self) -> int:
        return len(self.blocks) - 2

    @property
    def indices(self) -> range:
        return range(-1, self.top + 1)

    def block(self, j: int) -> np.ndarray:
        if not -1 <= j <= self.top:
            raise BlockIndexError(f"block index {j} outside −1..{self.top}")
        return self.blocks[j + 1]


@lru_cache(maxsize=32)
def _partition(geometry: LatticeGeometry) -> DyadicPartition:
    r = max_norm_frequency(geometry)
    top = top_block_index(geometry)

    blocks = [smooth_step(2.0 * r)]
    for j in range(top):
        blocks.append(smooth_step(2.0**-j * r) - smooth_step(2.0 ** (1 - j) * r))
    blocks.append(1.0 - np.sum(blocks, axis=0))

    for block in blocks:
        block.setflags(write=False)
    return DyadicPartition(geometry=geometry, blocks=tuple(blocks))
