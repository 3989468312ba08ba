import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import stats

# Tolerance of the `centered = raw_max − m_eps` identity.
CENTERING_TOLERANCE = 1e-12


@dataclass(frozen=True)
class MaxRecord:
    """The maximum of one field, its centring and the derivative martingale."""

    epsilon: float
    raw_max: float
    m_eps: float
    centered: float
    z_statistic: Optional[float] = None
    replica: int = 0

    def __post_init__(self):
        if abs(self.centered - (self.raw_max - self.m_eps)) > CENTERING_TOLERANCE * max(1.0, abs(self.raw_max)):
            raise ValueError("centered must equal raw_max - m_eps")

    def as_json(self) -> dict:
        return {
            "replica": self.replica,
            "epsilon": self.epsilon,
            "raw_max": self.raw_max,
            "m_eps": self.m_eps,
            "centered": self.centered,
            "z": self.z_statistic,
        }


@dataclass(frozen=True)
class GumbelFit:
    """Maximum-likelihood Gumbel law for a sample of maxima."""

    location: float
    scale: float
    ks_distance: float
    ks_pvalue: float
    log_likelihood: float
    count: int

    def cdf(self, x) -> np.ndarray:
        return stats.gumbel_r.cdf(x, loc=self.location, scale=self.scale)

    def as_json(self) -> dict:
        return {
            "mu": self.location,
            "beta": self.scale,
            "ks_distance": self.ks_distance,
            "ks_pvalue": self.ks_pvalue,
            "log_likelihood": self.log_likelihood,
            "count": self.count,
        }


@dataclass(frozen=True)
class MixtureFit:
    """
    A two-component Gumbel location mixture with shared scale.

    `gain` is its log-likelihood minus the single-Gumbel log-likelihood; a
    randomly shifted Gumbel law shows up as a clearly positive gain.
    """

    weight: float
    locations: Tuple[float, float]
    scale: float
    log_likelihood: float
    gain: float

    def as_json(self) -> dict:
        return {
            "weight": self.weight,
            "locations": list(self.locations),
            "beta": self.scale,
            "log_likelihood": self.log_likelihood,
            "gain": self.gain if math.isfinite(self.gain) else None,
        }
