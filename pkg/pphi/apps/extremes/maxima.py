"""
Maxima of sampled fields, their logarithmic centring and the derivative martingale.

Fields carry the variance normalisation in which the site variance grows
like (1/2π)·log(1/ε), so the centring and the exponential weight below use
the prefactors 1/√(2π) and √(8π).
"""

import math
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ...stats import mean_estimate
from ..lattice.models import LatticeGeometry, RealField
from .exceptions import DomainError
from .models import MaxRecord

# Exponential rate of the right tail of the centred maximum.
TAIL_RATE = math.sqrt(8.0 * math.pi)

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def m_eps(epsilon: float) -> float:
    """(1/√(2π))·(2 log(1/ε) − ¾ log log(1/ε)), defined for ε < 1/e."""
    if not 0.0 < epsilon < math.exp(-1.0):
        raise DomainError(epsilon, "1/e")
    log_inv = -math.log(epsilon)
    return _INV_SQRT_2PI * (2.0 * log_inv - 0.75 * math.log(log_inv))


def centered_max(f: RealField, replica: int = 0) -> MaxRecord:
    epsilon = f.geometry.epsilon
    centring = m_eps(epsilon)
    raw = float(np.max(f.values))
    return MaxRecord(epsilon=epsilon, raw_max=raw, m_eps=centring, centered=raw - centring, replica=replica)


def _martingale_values(values: np.ndarray, epsilon: float) -> np.ndarray:
    log_inv = -math.log(epsilon)
    integrand = 2.0 * _INV_SQRT_2PI * log_inv - values
    weight = np.exp(-2.0 * log_inv + TAIL_RATE * values)
    return epsilon**2 * np.sum(integrand * weight, axis=(-2, -1))


def derivative_martingale(f: RealField, epsilon: Optional[float] = None) -> float:
    """
    Z = ε² Σ_x ((2/√(2π)) log(1/ε) − f(x)) · e^{−2 log(1/ε) + √(8π) f(x)}.

    The value is reported as is; atypical fields may give a negative Z.
    """
    if epsilon is None:
        epsilon = f.geometry.epsilon
    if not 0.0 < epsilon < 1.0:
        raise DomainError(epsilon, "1")
    return float(_martingale_values(f.values, epsilon))


def max_records(
    fields: Union[np.ndarray, Sequence[RealField]],
    geometry: Optional[LatticeGeometry] = None,
    martingale: bool = True,
    start: int = 0,
) -> List[MaxRecord]:
    """
    Max records of a stack of fields.

    Args:
        fields: An (R, n, n) array together with `geometry`, or RealFields.
        geometry: Lattice of an array stack.
        martingale: Whether to evaluate the derivative martingale as well.
        start: Replica number of the first field.
    Return:
        One MaxRecord per field.
    """
    if not isinstance(fields, np.ndarray):
        fields = list(fields)
        if not fields:
            return []
        geometry = fields[0].geometry
        fields = np.stack([f.values for f in fields])
    if geometry is None:
        raise ValueError("an array of fields needs its geometry")

    epsilon = geometry.epsilon
    centring = m_eps(epsilon)
    raw = np.max(fields, axis=(-2, -1))
    z = _martingale_values(fields, epsilon) if martingale else [None] * len(raw)
    return [
        MaxRecord(
            epsilon=epsilon,
            raw_max=float(r),
            m_eps=centring,
            centered=float(r) - centring,
            z_statistic=None if zi is None else float(zi),
            replica=start + i,
        )
        for i, (r, zi) in enumerate(zip(raw, z))
    ]


def summarize_records(records: Sequence[MaxRecord]) -> Dict[float, dict]:
    """Per-ε mean of the centred maximum and mean and median of Z."""
    by_epsilon: Dict[float, List[MaxRecord]] = {}
    for record in records:
        by_epsilon.setdefault(record.epsilon, []).append(record)

    summary = {}
    for epsilon, group in sorted(by_epsilon.items(), reverse=True):
        centered = np.array([r.centered for r in group])
        entry = {"count": len(group), "m_eps": group[0].m_eps}
        if len(group) > 1:
            entry["centered_mean"] = mean_estimate(centered).as_dict()
        z = np.array([r.z_statistic for r in group if r.z_statistic is not None], dtype=np.float64)
        if z.size > 1:
            entry["z_mean"] = mean_estimate(z).as_dict()
            entry["z_median"] = float(np.median(z))
        summary[epsilon] = entry
    return summary
