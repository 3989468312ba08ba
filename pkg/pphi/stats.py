"""Monte-Carlo estimates with standard errors, shared by every app."""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special, stats

ArrayLike = Union[Sequence[float], np.ndarray]

# Family-wise false-alarm rate for simultaneous "within k SE" comparisons.
FAMILY_LEVEL = 1e-3

# Resampled values held in memory at once by `bootstrap_estimate`.
BOOTSTRAP_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class Estimate:
    """A Monte-Carlo estimate and its standard error."""

    value: float
    stderr: float

    def interval(self, level: float = 0.95) -> Tuple[float, float]:
        half = stats.norm.ppf(0.5 + level / 2.0) * self.stderr
        return (self.value - half, self.value + half)

    def __sub__(self, other: "Estimate") -> "Estimate":
        return Estimate(self.value - other.value, math.hypot(self.stderr, other.stderr))

    def as_dict(self) -> dict:
        low, high = self.interval()
        return {"value": self.value, "stderr": self.stderr, "ci95": [low, high]}


def mean_estimate(samples: ArrayLike, axis: int = 0):
    """Sample mean with the usual √(var/n) error; vectorised over `axis`."""
    data = np.asarray(samples, dtype=np.float64)
    count = data.shape[axis]
    if count < 2:
        raise ValueError("need at least two samples for a standard error")
    mean = data.mean(axis=axis)
    stderr = data.std(axis=axis, ddof=1) / math.sqrt(count)
    if np.ndim(mean) == 0:
        return Estimate(float(mean), float(stderr))
    return mean, stderr


def variance_estimate(samples: ArrayLike, axis: int = 0):
    """Variance of centred samples E[X²] with the standard error of X²'s mean."""
    data = np.asarray(samples, dtype=np.float64)
    return mean_estimate(data**2, axis=axis)


def log_mean_exp(values: ArrayLike) -> float:
    data = np.asarray(values, dtype=np.float64)
    return float(special.logsumexp(data) - math.log(data.size))


def bootstrap_estimate(
    samples: ArrayLike,
    statistic: Callable[..., np.ndarray] = np.mean,
    seed: int = 0,
    resamples: int = 999,
) -> Estimate:
    """Point value of `statistic` with its bootstrap standard error.

    `statistic` must accept an `axis` keyword, as numpy reductions do.
    """
    data = np.asarray(samples, dtype=np.float64)
    if np.all(data == data.flat[0]):
        return Estimate(float(statistic(data, axis=-1)), 0.0)
    result = stats.bootstrap(
        (data,),
        statistic,
        n_resamples=resamples,
        vectorized=True,
        batch=max(1, BOOTSTRAP_ELEMENTS // max(data.shape[-1], 1)),
        method="percentile",
        random_state=np.random.default_rng(seed),
    )
    return Estimate(float(statistic(data, axis=-1)), float(result.standard_error))


def bonferroni_multiplier(comparisons: int = 1, floor: float = 3.0) -> float:
    """Standard-error multiplier for `comparisons` simultaneous two-sided checks."""
    return max(floor, float(stats.norm.ppf(1.0 - FAMILY_LEVEL / (2.0 * max(comparisons, 1)))))


def within_standard_errors(
    expected: float,
    estimate: Estimate,
    comparisons: int = 1,
    relative_allowance: float = 0.0,
    multiplier: Optional[float] = None,
) -> bool:
    if multiplier is None:
        multiplier = bonferroni_multiplier(comparisons)
    slack = multiplier * estimate.stderr + relative_allowance * abs(expected)
    return abs(estimate.value - expected) <= slack


def log_mean_exp_statistic(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """log((1/n) Σ e^{x}) along `axis`, usable with `bootstrap_estimate`."""
    values = np.asarray(values, dtype=np.float64)
    return special.logsumexp(values, axis=axis) - math.log(values.shape[axis])
