"""Lᵖ, Sobolev, Besov and Hölder norms on Ω_ε (normalised measure ε² Σ)."""

import math
from typing import Optional

import numpy as np
from django.conf import settings
from scipy import fft

from ..lattice.models import LatticeGeometry, RealField
from ..lattice.spectral import apply_multiplier, continuum_k_squared, embed_trig, forward_fft
from .exceptions import NormParameterError
from .models import DyadicPartition

# Elements per block of shifted copies compared at once.
HOLDER_BLOCK = 1 << 22


def _check_exponent(p: float, name: str = "p") -> float:
    p = float(p)
    if math.isnan(p) or p < 1:
        raise NormParameterError(f"{name} must lie in [1, ∞], got {p!r}")
    return p


def lp_norm(f: RealField, p: float) -> float:
    """(ε² Σ_x |f(x)|^p)^{1/p}; the maximum of |f| for p = ∞."""
    p = _check_exponent(p)
    values = np.abs(f.values)
    if math.isinf(p):
        return float(values.max())
    return float(np.mean(values**p) ** (1.0 / p))


def sobolev_norm(f: RealField, alpha: float) -> float:
    """‖f‖_{H^α} = (Σ_k (1 + |k|²)^α |f̂(k)|²)^{1/2} with continuum |k|²."""
    weights = (1.0 + continuum_k_squared(f.geometry)) ** float(alpha)
    power = np.abs(forward_fft(f).coeffs) ** 2
    return float(math.sqrt(np.sum(weights * power)))


def sobolev_norm_values(values: np.ndarray, geometry: LatticeGeometry, alpha: float) -> np.ndarray:
    """`sobolev_norm` of every field in a stack whose last two axes are the lattice."""
    weights = (1.0 + continuum_k_squared(geometry)) ** float(alpha)
    n = geometry.n
    power = np.abs(fft.fft2(values, axes=(-2, -1)) / (n * n)) ** 2
    return np.sqrt(np.sum(weights * power, axis=(-2, -1)))


def lp_block(f: RealField, j: int, partition: Optional[DyadicPartition] = None) -> RealField:
    """The Littlewood-Paley block Δ_j f = F⁻¹(χ_j f̂)."""
    if partition is None:
        partition = DyadicPartition.for_geometry(f.geometry)
    return RealField(f.geometry, apply_multiplier(f, partition.block(j)))


def besov_norm(
    f: RealField, p: float, q: float, alpha: float, partition: Optional[DyadicPartition] = None
) -> float:
    """‖f‖_{B^α_{p,q}} = (Σ_j (2^{jα} ‖Δ_j f‖_{Lᵖ})^q)^{1/q}, a supremum for q = ∞."""
    p = _check_exponent(p)
    q = _check_exponent(q, "q")
    if partition is None:
        partition = DyadicPartition.for_geometry(f.geometry)
    terms = np.array(
        [2.0 ** (j * float(alpha)) * lp_norm(lp_block(f, j, partition), p) for j in partition.indices]
    )
    if math.isinf(q):
        return float(terms.max())
    return float(np.sum(terms**q) ** (1.0 / q))


def _torus_distances(size: int) -> np.ndarray:
    offsets = np.arange(size)
    wrapped = np.minimum(offsets, size - offsets) / size
    return np.sqrt(wrapped[:, np.newaxis] ** 2 + wrapped[np.newaxis, :] ** 2)


def _half_shifts(size: int) -> np.ndarray:
    """One shift from each pair ±s, ordered by torus length."""
    a, b = np.meshgrid(np.arange(size // 2 + 1), np.arange(size), indexing="ij")
    # shifts s and −s give the same pairs
    keep = ~(((a == 0) | (2 * a == size)) & (b > size // 2))
    keep[0, 0] = False
    shifts = np.stack([a[keep], b[keep]], axis=1)
    distances = _torus_distances(size)[shifts[:, 0], shifts[:, 1]]
    return shifts[np.argsort(distances, kind="stable")]


def holder_seminorm(values: np.ndarray, alpha: float) -> float:
    """
    sup_{x≠y} |f(x) − f(y)| / |x − y|^α over the sites of a periodic grid.

    Shifts are compared in blocks, shortest first. No pair at torus distance d
    can beat (max f − min f) / d^α, so the scan stops once that bound falls
    below the supremum found so far; the result is exact.
    """
    size = values.shape[0]
    distances = _torus_distances(size)
    oscillation = float(values.max() - values.min())
    shifts = _half_shifts(size)
    rows = np.arange(size)[np.newaxis, :, np.newaxis]
    columns = np.arange(size)[np.newaxis, np.newaxis, :]
    chunk = max(1, HOLDER_BLOCK // values.size)

    best = 0.0
    for start in range(0, len(shifts), chunk):
        a, b = shifts[start : start + chunk].T
        scale = distances[a, b] ** alpha
        if oscillation / scale[0] <= best:
            break
        # np.roll by (a, b): out[i, j] = values[i − a, j − b]
        rolled = values[(rows - a[:, np.newaxis, np.newaxis]) % size, (columns - b[:, np.newaxis, np.newaxis]) % size]
        differences = np.abs(values[np.newaxis] - rolled).max(axis=(1, 2))
        best = max(best, float(np.max(differences / scale)))
    return best


def holder_norm(f: RealField, alpha: float, refine: Optional[int] = None) -> float:
    """‖f‖_{C^α} = ‖I_ε f‖_{L^∞} + [I_ε f]_α, evaluated on a grid refined `refine` times."""
    if not 0 < alpha < 1:
        raise NormParameterError(f"Hölder exponent must lie in (0, 1), got {alpha!r}")
    if refine is None:
        refine = settings.PPHI_HOLDER_REFINE
    if refine < 2:
        raise NormParameterError(f"refine must be ≥ 2, got {refine!r}")
    fine = embed_trig(f, refine * f.geometry.n).values
    return float(np.max(np.abs(fine))) + holder_seminorm(fine, alpha)
