"""The integrated drift I_{s,t}(u) = ∫_s^t q_τ u_τ dτ for piecewise-constant drifts.

On an interval [a, b] the drift is constant, so I picks up the exact
multiplier ∫_a^b q̂_τ dτ = (1/â) log((bâ + 1)/(aâ + 1)), â = −Δ̂ + m².
"""

import math
from functools import lru_cache

import numpy as np
from scipy import fft

from ..gff.models import ScaleGrid
from ..lattice.models import LatticeGeometry, RealField, Scale
from ..lattice.spectral import continuum_k_squared, covariance_increment_symbol, mass_symbol
from .exceptions import DriftGridError
from .models import DriftPath


def interval_q_integral(geom: LatticeGeometry, s: Scale, t: Scale) -> np.ndarray:
    """∫_s^t q̂_τ dτ on the whole dual set, for 0 ≤ s ≤ t < ∞."""
    s, t = float(s), float(t)
    if not 0 <= s <= t:
        raise DriftGridError(f"need 0 ≤ s ≤ t, got s={s!r}, t={t!r}")
    if math.isinf(t):
        raise DriftGridError("∫ q̂ diverges on an interval reaching t = ∞")
    a = mass_symbol(geom)
    return np.log1p((t - s) * a / (s * a + 1.0)) / a


@lru_cache(maxsize=32)
def _integration_symbols(grid: ScaleGrid, geom: LatticeGeometry) -> np.ndarray:
    times = grid.times
    symbols = np.stack([interval_q_integral(geom, times[i + 2], times[i + 1]) for i in range(len(grid.interior))])
    symbols.setflags(write=False)
    return symbols


def integration_symbols(grid: ScaleGrid, geom: LatticeGeometry) -> np.ndarray:
    """(K−1, n, n) stack of ∫ q̂ over the interval of each interior drift field."""
    return _integration_symbols(grid, geom)


def _field_range(grid: ScaleGrid, s: Scale, t: Scale) -> slice:
    if s > t:
        raise DriftGridError(f"need s ≤ t, got s={s!r}, t={t!r}")
    # field i lives on [t_{i+2}, t_{i+1}]
    first = max(grid.index(t) - 1, 0)
    last = grid.index(s) - 1
    return slice(first, max(last, first))


def integrated_drift_values(
    drifts: np.ndarray, grid: ScaleGrid, geom: LatticeGeometry, s: Scale = 0.0, t: Scale = math.inf
) -> np.ndarray:
    """I_{s,t} for drift arrays whose last three axes are (field, site, site)."""
    chosen = _field_range(grid, s, t)
    coeffs = fft.fft2(drifts[..., chosen, :, :], axes=(-2, -1))
    total = np.sum(coeffs * integration_symbols(grid, geom)[chosen], axis=-3)
    return fft.ifft2(total, axes=(-2, -1)).real


def integrated_drift(u: DriftPath, s: Scale = 0.0, t: Scale = math.inf) -> RealField:
    """I_{s,t}(u) for grid times s ≤ t."""
    return RealField(u.geometry, integrated_drift_values(u.as_array(), u.grid, u.geometry, s, t))


def integrated_drift_constant(geom: LatticeGeometry, alpha: float, s: Scale, t: Scale) -> float:
    """
    sup_k (1 + |k|²)^α (ĉ_t − ĉ_s)(k).

    By Cauchy-Schwarz, ‖I_{s,t}(u)‖²_{H^α} is at most this constant times the
    action Σ‖u‖²Δt of any drift supported in [s, t].
    """
    weights = (1.0 + continuum_k_squared(geom)) ** float(alpha)
    return float(np.max(weights * covariance_increment_symbol(geom, s, t)))
