"""Exact spectral sampling of the massive GFF and of its scale decomposition.

A field with spectral variance σ̂²(k) is synthesised from real white noise w
as Φ = n · F⁻¹[σ̂ · F w] (unnormalised transforms), which gives independent
Hermitian-symmetric coefficients with E|Φ̂(k)|² = σ̂²(k). The noise for
interval j of replica r is the stream ("gff", r, j) of the master seed; the
stand-alone samples of `sample_gff` draw from ("gff-terminal", r), so they
share no noise with any scale path.
"""

import logging
import math
from typing import List, Optional

import numpy as np
from django.conf import settings
from scipy import fft, optimize

from ..harness.seeds import check_seed, rng_for
from ..harness.workers import map_replicas
from ..lattice.models import INFINITE_SCALE, LatticeGeometry, RealField, Scale
from ..lattice.spectral import apply_multiplier, covariance_increment_symbol, mass_symbol
from .exceptions import ScaleGridError
from .models import GffPath, ScaleGrid

logger = logging.getLogger(__name__)

STREAM = "gff"
TERMINAL_STREAM = "gff-terminal"


def white_noise(geom: LatticeGeometry, seed: int, *labels) -> np.ndarray:
    return rng_for(seed, *labels).standard_normal(geom.shape)


def gaussian_from_noise(noise: np.ndarray, variance_symbol: np.ndarray) -> np.ndarray:
    """Colour white noise (one field or a stack) to the given spectral variance."""
    n = noise.shape[-1]
    return n * apply_multiplier(noise, np.sqrt(variance_symbol))


def sample_gff(geom: LatticeGeometry, seed: int, replica: int = 0) -> RealField:
    """A sample of the massive GFF with covariance (−Δ^ε + m²)⁻¹."""
    check_seed(seed)
    variance = covariance_increment_symbol(geom, 0.0, INFINITE_SCALE)
    noise = white_noise(geom, seed, TERMINAL_STREAM, replica)
    return RealField(geom, gaussian_from_noise(noise, variance))


def sample_gff_batch(geom: LatticeGeometry, seed: int, replicas: int, start: int = 0) -> np.ndarray:
    """Replicas start..start+replicas−1 of `sample_gff`, stacked as an (R, n, n) array."""
    check_seed(seed)
    variance = covariance_increment_symbol(geom, 0.0, INFINITE_SCALE)
    noise = np.stack([white_noise(geom, seed, TERMINAL_STREAM, start + r) for r in range(replicas)])
    return gaussian_from_noise(noise, variance)


def sample_scale_path(geom: LatticeGeometry, grid: ScaleGrid, seed: int, replica: int = 0) -> GffPath:
    """Sample t ↦ Φ_t on the grid from independent exact increments."""
    check_seed(seed)
    fields = [RealField.zeros(geom)]
    current = np.zeros(geom.shape)
    for j, upper, lower in grid.interval_bounds():
        variance = covariance_increment_symbol(geom, lower, upper)
        current = current + gaussian_from_noise(white_noise(geom, seed, STREAM, replica, j), variance)
        fields.append(RealField(geom, current))
    return GffPath(geometry=geom, grid=grid, fields=tuple(fields), seed=seed, replica=replica)


def sample_paths(
    geom: LatticeGeometry, grid: ScaleGrid, seed: int, replicas: int, workers: Optional[int] = None
) -> List[GffPath]:
    return map_replicas(lambda r: sample_scale_path(geom, grid, seed, r), range(replicas), workers)


def y_field(path: GffPath, t: Scale) -> RealField:
    """The small-scale field Y_t = Φ_0 − Φ_t, with spectral variance ĉ_t."""
    return path.terminal - path.at(t)


def _solve_decreasing(func, description: str) -> float:
    # func is continuous and changes sign once on (0, ∞); bracket in log scale
    low, high = 1e-12, 1.0
    while func(high) > 0:
        high *= 4.0
        if high > 1e30:
            raise ScaleGridError(f"could not bracket {description}")
    while func(low) <= 0:
        low /= 4.0
        if low < 1e-300:
            raise ScaleGridError(f"could not bracket {description}")
    return float(optimize.brentq(func, low, high, xtol=1e-14 * high, rtol=1e-12))


def auto_t_max(geom: LatticeGeometry, tolerance: Optional[float] = None) -> float:
    """Smallest T with Σ_k (ĉ_∞ − ĉ_T)(k) ≤ tolerance · Σ_k ĉ_∞(k)."""
    if tolerance is None:
        tolerance = settings.PPHI_TAIL_TOLERANCE
    a = mass_symbol(geom)
    total = float(np.sum(1.0 / a))
    t_max = _solve_decreasing(
        lambda t: float(np.sum(1.0 / (a * (t * a + 1.0)))) - tolerance * total, "T_max"
    )
    logger.info("Resolved T_max = %.6g for n=%d, m²=%g", t_max, geom.n, geom.mass2)
    return t_max


def auto_t_min(geom: LatticeGeometry, tolerance: Optional[float] = None) -> float:
    """Largest t with Σ_k ĉ_t(k) ≤ tolerance · c_ε: the scales below t are negligible."""
    if tolerance is None:
        tolerance = settings.PPHI_TAIL_TOLERANCE
    a = mass_symbol(geom)
    total = float(np.sum(1.0 / a))
    t_min = _solve_decreasing(
        lambda t: tolerance * total - float(np.sum(t / (t * a + 1.0))), "t_min"
    )
    logger.info("Resolved t_min = %.6g for n=%d, m²=%g", t_min, geom.n, geom.mass2)
    return t_min


def default_grid(
    geom: LatticeGeometry,
    rho: Optional[float] = None,
    t_max: Optional[float] = None,
    t_min: Optional[float] = None,
) -> ScaleGrid:
    """The geometric grid with any missing parameter resolved by the tail rules."""
    if rho is None:
        rho = settings.PPHI_DEFAULT_RHO
    if t_max is None:
        t_max = auto_t_max(geom)
    if t_min is None:
        t_min = auto_t_min(geom)
    t_min = min(t_min, t_max)
    grid = ScaleGrid.geometric(rho, t_max, t_min)
    logger.debug("Scale grid with %d intervals (rho=%g)", grid.intervals, rho)
    return grid


def spectral_variance_of(samples: np.ndarray) -> np.ndarray:
    """Per-mode E|f̂(k)|² from an (R, n, n) stack of sampled fields."""
    n = samples.shape[-1]
    coeffs = fft.fft2(samples, axes=(-2, -1)) / (n * n)
    return np.mean(np.abs(coeffs) ** 2, axis=0)


def pointwise_variance_expected(geom: LatticeGeometry, t: Scale) -> float:
    """Σ_k ĉ_t(k), the site variance of Y_t."""
    return float(np.sum(covariance_increment_symbol(geom, 0.0, t)))


def covariance_at_offset(geom: LatticeGeometry, offset, t: Scale = math.inf) -> float:
    """Σ_k ĉ_t(k) e^{ik·(x−y)} for x − y = ε·offset."""
    symbol = covariance_increment_symbol(geom, 0.0, t)
    kernel = fft.ifft2(symbol).real * geom.sites
    return float(kernel[offset[0] % geom.n, offset[1] % geom.n])
