import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from ..lattice.models import INFINITE_SCALE, LatticeGeometry, RealField, Scale
from .exceptions import GridTimeError, ScaleGridError


@dataclass(frozen=True)
class ScaleGrid:
    """
    A discretisation ∞ = t_0 > t_1 > … > t_K = 0 of the scale axis.

    Interval j is [t_{j+1}, t_j]; the flow runs from t_0 = ∞ toward 0, so
    interval indices increase as the scale decreases.
    """

    times: Tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if len(times) < 2:
            raise ScaleGridError("a scale grid needs at least the endpoints ∞ and 0")
        if not math.isinf(times[0]) or times[0] < 0:
            raise ScaleGridError(f"a scale grid starts at ∞, not {times[0]!r}")
        if times[-1] != 0.0:
            raise ScaleGridError(f"a scale grid ends at 0, not {times[-1]!r}")
        interior = times[1:-1]
        if any(math.isnan(t) or math.isinf(t) or t <= 0 for t in interior):
            raise ScaleGridError("interior grid times must be finite and positive")
        if any(a <= b for a, b in zip(times, times[1:])):
            raise ScaleGridError("grid times must be strictly decreasing")
        object.__setattr__(self, "times", times)

    @classmethod
    def geometric(cls, rho: float, t_max: float, t_min: float) -> "ScaleGrid":
        """The grid ∞ > t_max > ρ·t_max > … ≥ t_min > 0."""
        if not 0 < rho < 1:
            raise ScaleGridError(f"rho must lie in (0, 1), got {rho!r}")
        if not 0 < t_min <= t_max < math.inf:
            raise ScaleGridError(f"need 0 < t_min ≤ t_max < ∞, got t_min={t_min!r}, t_max={t_max!r}")

        steps = int(math.floor(math.log(t_min / t_max) / math.log(rho) + 1e-9))
        interior = [t_max * rho**j for j in range(steps + 1)]
        return cls(times=(INFINITE_SCALE, *interior, 0.0))

    @property
    def intervals(self) -> int:
        return len(self.times) - 1

    @property
    def interior(self) -> Tuple[float, ...]:
        return self.times[1:-1]

    @property
    def rho(self) -> Optional[float]:
        """The common ratio of the interior times, if they are geometric."""
        interior = np.array(self.interior)
        if interior.size < 2:
            return None
        ratios = interior[1:] / interior[:-1]
        if np.allclose(ratios, ratios[0], rtol=1e-9):
            return float(ratios[0])
        return None

    def index(self, t: Scale) -> int:
        t = float(t)
        for index, time in enumerate(self.times):
            if time == t or (not math.isinf(t) and math.isclose(time, t, rel_tol=1e-12)):
                return index
        raise GridTimeError(f"{t!r} is not a grid time")

    def interval_bounds(self) -> Iterator[Tuple[int, float, float]]:
        """Yield (j, t_j, t_{j+1}) from the largest scale down."""
        for j in range(self.intervals):
            yield j, self.times[j], self.times[j + 1]

    def as_json(self):
        return ["inf" if math.isinf(t) else t for t in self.times]

    @classmethod
    def from_json(cls, times: Sequence) -> "ScaleGrid":
        return cls(times=tuple(INFINITE_SCALE if t == "inf" else float(t) for t in times))


@dataclass(frozen=True)
class GffPath:
    """Represents one realisation of the scale-decomposed GFF t ↦ Φ_t on a grid."""

    geometry: LatticeGeometry
    grid: ScaleGrid
    fields: Tuple[RealField, ...] = field(repr=False)
    seed: int = 0
    replica: int = 0

    def __post_init__(self):
        if len(self.fields) != len(self.grid.times):
            raise ScaleGridError(
                f"path has {len(self.fields)} fields for {len(self.grid.times)} grid times"
            )
        if any(f.geometry != self.geometry for f in self.fields):
            raise ScaleGridError("path fields live on different lattices")
        if np.any(self.fields[0].values != 0):
            raise ScaleGridError("the field at t = ∞ must vanish")
        object.__setattr__(self, "fields", tuple(self.fields))

    def at(self, t: Scale) -> RealField:
        return self.fields[self.grid.index(t)]

    @property
    def terminal(self) -> RealField:
        """Φ_0, a sample of the full GFF."""
        return self.fields[-1]

    def increment(self, j: int) -> RealField:
        """Φ_{t_{j+1}} − Φ_{t_j}, the Gaussian increment over interval j."""
        return self.fields[j + 1] - self.fields[j]
