import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ...stats import Estimate, bonferroni_multiplier
from ..gff.models import ScaleGrid
from ..lattice.models import LatticeGeometry, RealField
from .exceptions import DriftGridError, OptimizerConfigError

# Steps averaged when the optimiser trace is checked for monotonicity.
TRACE_WINDOW = 5


@dataclass(frozen=True)
class DriftPath:
    """
    Represents a piecewise-constant drift u on a scale grid.

    `fields[i]` is the value on the interval [t_{i+2}, t_{i+1}], one field per
    interior grid time t_1, …, t_{K−1}. The interval [t_1, ∞] carries no drift.
    """

    grid: ScaleGrid
    fields: Tuple[RealField, ...] = field(repr=False)

    def __post_init__(self):
        fields = tuple(self.fields)
        if len(fields) != len(self.grid.interior):
            raise DriftGridError(f"{len(fields)} drift fields for {len(self.grid.interior)} interior times")
        if not fields:
            raise DriftGridError("a drift needs at least one interior grid time")
        if len({f.geometry for f in fields}) != 1:
            raise DriftGridError("drift fields live on different lattices")
        object.__setattr__(self, "fields", fields)

    @classmethod
    def zeros(cls, grid: ScaleGrid, geometry: LatticeGeometry) -> "DriftPath":
        return cls(grid, tuple(RealField.zeros(geometry) for _ in grid.interior))

    @classmethod
    def from_array(cls, grid: ScaleGrid, geometry: LatticeGeometry, values: np.ndarray) -> "DriftPath":
        return cls(grid, tuple(RealField(geometry, v) for v in values))

    @property
    def geometry(self) -> LatticeGeometry:
        return self.fields[0].geometry

    @property
    def durations(self) -> np.ndarray:
        """Δt of the interval each field is held on."""
        times = self.grid.times
        return np.array([times[i + 1] - times[i + 2] for i in range(len(self.fields))])

    def as_array(self) -> np.ndarray:
        return np.stack([f.values for f in self.fields])

    def action(self) -> float:
        """Σ ‖u‖²_{L²} Δt; the control cost is half of it."""
        squares = np.mean(self.as_array() ** 2, axis=(-2, -1))
        return float(np.sum(squares * self.durations))

    def _check_compatible(self, other: "DriftPath"):
        if other.grid != self.grid or other.geometry != self.geometry:
            raise DriftGridError("drifts live on different grids or lattices")

    def __add__(self, other: "DriftPath") -> "DriftPath":
        self._check_compatible(other)
        return DriftPath.from_array(self.grid, self.geometry, self.as_array() + other.as_array())

    def __mul__(self, scalar: float) -> "DriftPath":
        return DriftPath.from_array(self.grid, self.geometry, float(scalar) * self.as_array())

    __rmul__ = __mul__


@dataclass(frozen=True)
class SgdConfig:
    steps: int
    rate: float
    batch: int
    final_batch: Optional[int] = None

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise OptimizerConfigError(f"steps must be a positive integer, got {self.steps!r}")
        if not 0 < self.rate <= 1:
            raise OptimizerConfigError(f"rate must lie in (0, 1], got {self.rate!r}")
        if int(self.batch) != self.batch or self.batch < 2:
            raise OptimizerConfigError(f"batch must be an integer ≥ 2, got {self.batch!r}")
        if self.final_batch is not None and self.final_batch < 2:
            raise OptimizerConfigError(f"final_batch must be ≥ 2, got {self.final_batch!r}")

    @property
    def evaluation_batch(self) -> int:
        return int(self.final_batch or 4 * self.batch)


@dataclass(frozen=True)
class BdReport:
    """
    The variational objective of a drift next to its target −log E[e^{−v₀}].

    `gap` is f_value − reference with the standard errors combined.
    """

    f_value: Estimate
    reference_log_laplace: Estimate
    trace: Tuple[float, ...] = field(default=(), repr=False)
    action: Optional[float] = None
    trace_stderr: Tuple[float, ...] = field(default=(), repr=False)

    @property
    def gap(self) -> Estimate:
        return self.f_value - self.reference_log_laplace

    def smoothed_trace(self, window: int = TRACE_WINDOW) -> Tuple[np.ndarray, np.ndarray]:
        """Moving averages of the objective trace and their standard errors."""
        values = np.asarray(self.trace, dtype=np.float64)
        errors = np.asarray(self.trace_stderr or np.zeros(len(values)), dtype=np.float64)
        window = max(1, min(window, len(values)))
        kernel = np.full(window, 1.0 / window)
        smooth = np.convolve(values, kernel, mode="valid")
        return smooth, np.sqrt(np.convolve(errors**2, kernel, mode="valid") / window)

    @property
    def trace_monotone(self) -> Optional[bool]:
        """Whether the smoothed trace never rises by more than its combined confidence interval."""
        if not self.trace:
            return None
        smooth, errors = self.smoothed_trace()
        if len(smooth) < 2:
            return True
        rises = np.diff(smooth)
        allowance = bonferroni_multiplier(len(rises)) * np.hypot(errors[1:], errors[:-1])
        return bool(np.all(rises <= allowance))

    def as_json(self) -> dict:
        result = {
            "f_value": self.f_value.as_dict(),
            "reference_log_laplace": self.reference_log_laplace.as_dict(),
            "gap": self.gap.as_dict(),
        }
        if self.action is not None:
            result["action"] = self.action
        if self.trace:
            result["trace"] = list(self.trace)
            result["trace_monotone"] = self.trace_monotone
        return result
