"""Closed forms for the Gaussian interaction P = a₂φ².

With P Wick-ordered by the lattice variance c_ε, the measure e^{−v₀} ν^GFF
is Gaussian with spectral variance 1/(a + 2a₂), a = −Δ̂ + m², and every
quantity of the flow is an explicit spectral multiplier.
"""

import numpy as np

from ..gff.models import ScaleGrid
from ..lattice.models import LatticeGeometry, RealField, Scale
from ..lattice.spectral import apply_multiplier, covariance_increment_symbol, mass_symbol, pv_covariance_symbol


def quadratic_gradient_symbol(geom: LatticeGeometry, a2: float, t: Scale) -> np.ndarray:
    """Multiplier of ∇v_t: 2a₂ / (1 + 2a₂ĉ_t)."""
    return 2.0 * a2 / (1.0 + 2.0 * a2 * pv_covariance_symbol(geom, t))


def quadratic_gradient(phi: RealField, a2: float, t: Scale) -> RealField:
    return RealField(phi.geometry, apply_multiplier(phi, quadratic_gradient_symbol(phi.geometry, a2, t)))


def quadratic_mode_variance(geom: LatticeGeometry, a2: float) -> np.ndarray:
    """E|Φ̂₀(k)|² = 1/(−Δ̂ + m² + 2a₂)."""
    return 1.0 / (mass_symbol(geom) + 2.0 * a2)


def quadratic_log_laplace(geom: LatticeGeometry, a2: float) -> float:
    """−log E[e^{−v₀(Φ)}] under the GFF: ½ Σ_k [log(1 + 2a₂ĉ_∞) − 2a₂ĉ_∞]."""
    scaled = 2.0 * a2 * pv_covariance_symbol(geom, np.inf)
    return float(0.5 * np.sum(np.log1p(scaled) - scaled))


def quadratic_scheme_variance(geom: LatticeGeometry, a2: float, grid: ScaleGrid) -> np.ndarray:
    """
    Mode variances of Φ₀^P produced by the Euler scheme with exact gradients.

    Each step maps V to (1 − Δĉ·m)² V + Δĉ, with m the gradient multiplier at
    the larger end of the interval. Comparing against this isolates the
    Monte-Carlo error of the flow from its time-discretisation error.
    """
    variance = np.zeros(geom.shape)
    for _, upper, lower in grid.interval_bounds():
        step = covariance_increment_symbol(geom, lower, upper)
        contraction = 1.0 - step * quadratic_gradient_symbol(geom, a2, upper)
        variance = contraction**2 * variance + step
    return variance
