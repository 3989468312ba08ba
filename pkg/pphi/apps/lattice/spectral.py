"""Discrete Fourier analysis on the unit torus lattice Ω_ε.

Conventions: coefficients are normalised by the lattice integral,
f̂(k) = ε² Σ_x f(x) e^{−ik·x}, so that f(x) = Σ_k f̂(k) e^{ik·x} and
Parseval reads ε² Σ_x |f(x)|² = Σ_k |f̂(k)|². The dual set is
Ω_ε* = {k ∈ 2πZ²: −π/ε < k_i ≤ π/ε}; spectra are stored in FFT layout and
`dual_modes` gives the integer mode m = k/2π of every entry.

Every covariance-type operator is a diagonal multiplier in this basis and is
applied with `apply_multiplier`; no dense matrices are ever formed.
"""

import math
from functools import lru_cache
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import fft

from .exceptions import DualIndexError, IncompatibleGridError, SymmetryError
from .models import LatticeGeometry, RealField, Scale, SpectralField

ArrayOrField = Union[np.ndarray, RealField]

SYMMETRY_TOLERANCE = 1e-9
TWO_PI = 2.0 * math.pi


@lru_cache(maxsize=64)
def _modes_1d(n: int) -> np.ndarray:
    modes = np.rint(fft.fftfreq(n, d=1.0 / n)).astype(np.int64)
    if n % 2 == 0:
        modes[n // 2] = n // 2
    modes.setflags(write=False)
    return modes


def dual_modes(geom: LatticeGeometry) -> Tuple[np.ndarray, np.ndarray]:
    """Integer modes (m₁, m₂) of every FFT-layout entry, with −n/2 < m_i ≤ n/2."""
    modes = _modes_1d(geom.n)
    return np.meshgrid(modes, modes, indexing="ij")


def dual_frequencies(geom: LatticeGeometry) -> Tuple[np.ndarray, np.ndarray]:
    m1, m2 = dual_modes(geom)
    return TWO_PI * m1, TWO_PI * m2


def continuum_k_squared(geom: LatticeGeometry) -> np.ndarray:
    """|k|² on the dual set (continuum weights, used by the Sobolev norms)."""
    k1, k2 = dual_frequencies(geom)
    return k1**2 + k2**2


def forward_fft(f: RealField) -> SpectralField:
    """f̂(k) = ε² Σ_x f(x) e^{−ik·x}."""
    return SpectralField(f.geometry, fft.fft2(f.values) / f.geometry.sites)


def _real_part_checked(values: np.ndarray, reference: float = 0.0) -> np.ndarray:
    # tolerance relative to the sup norm of the complex result, or of the field it came from
    residue = float(np.max(np.abs(values.imag), initial=0.0))
    scale = max(float(np.max(np.abs(values), initial=0.0)), reference)
    if residue > SYMMETRY_TOLERANCE * scale:
        raise SymmetryError(
            f"inverse transform has imaginary residue {residue:.3e} (field norm {scale:.3e})"
        )
    return np.ascontiguousarray(values.real)


def _sup(f: RealField) -> float:
    return float(np.max(np.abs(f.values), initial=0.0))


def inverse_fft(g: SpectralField) -> RealField:
    """f(x) = Σ_k ĝ(k) e^{ik·x}; the result must be real."""
    values = fft.ifft2(g.coeffs) * g.geometry.sites
    return RealField(g.geometry, _real_part_checked(values))


def apply_multiplier(f: ArrayOrField, symbol: np.ndarray) -> np.ndarray:
    """Apply a real, even Fourier multiplier to a field or a stack of fields.

    Accepts an array whose last two axes are the lattice; returns an array of
    the same shape. Real even symbols preserve realness exactly, so the
    imaginary part is dropped without a check.
    """
    values = f.values if isinstance(f, RealField) else f
    return fft.ifft2(fft.fft2(values, axes=(-2, -1)) * symbol, axes=(-2, -1)).real


def _check_dual_index(k: Sequence[float], geom: LatticeGeometry) -> Tuple[int, int]:
    if len(k) != 2:
        raise DualIndexError(f"dual index must have two components, got {k!r}")
    modes = []
    for component in k:
        m = component / TWO_PI
        m_int = round(m)
        if abs(m - m_int) > 1e-9 * max(1.0, abs(m)):
            raise DualIndexError(f"{component!r} is not a multiple of 2π")
        if not -geom.n / 2 < m_int <= geom.n / 2:
            raise DualIndexError(f"mode {m_int} lies outside the dual set of n={geom.n}")
        modes.append(int(m_int))
    return modes[0], modes[1]


def _laplacian_from_k(k1, k2, epsilon: float):
    return (2.0 - 2.0 * np.cos(epsilon * k1) + 2.0 - 2.0 * np.cos(epsilon * k2)) / epsilon**2


def laplacian_multiplier(k: Sequence[float], geom: LatticeGeometry) -> float:
    """−Δ̂^ε(k) = ε⁻² Σ_i (2 − 2cos(εk_i)) for k ∈ Ω_ε*."""
    m1, m2 = _check_dual_index(k, geom)
    return float(_laplacian_from_k(TWO_PI * m1, TWO_PI * m2, geom.epsilon))


@lru_cache(maxsize=64)
def _laplacian_symbol(geom: LatticeGeometry) -> np.ndarray:
    k1, k2 = dual_frequencies(geom)
    symbol = _laplacian_from_k(k1, k2, geom.epsilon)
    symbol.setflags(write=False)
    return symbol


def laplacian_symbol(geom: LatticeGeometry) -> np.ndarray:
    """−Δ̂^ε on the whole dual set, FFT layout (read-only, cached per geometry)."""
    return _laplacian_symbol(geom)


def mass_symbol(geom: LatticeGeometry) -> np.ndarray:
    """a(k) = −Δ̂^ε(k) + m²."""
    return laplacian_symbol(geom) + geom.mass2


def multiplier_deficit(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """1 − x⁻²(2 − 2cos x): relative deficit of the lattice symbol against |k|² per axis.

    Evaluated with the half-angle form 1 − (sin(x/2)/(x/2))² to avoid cancellation.
    """
    half = np.asarray(x, dtype=np.float64) / 2.0
    result = 1.0 - np.sinc(half / math.pi) ** 2
    return float(result) if np.ndim(result) == 0 else result


def _pv_from_a(a, t: Scale):
    if math.isinf(t):
        return 1.0 / a
    return t / (t * a + 1.0)


def _q_from_a(a, t: Scale):
    if math.isinf(t):
        return np.zeros_like(a) if isinstance(a, np.ndarray) else 0.0
    return 1.0 / (t * a + 1.0)


def _check_scale(t: Scale) -> float:
    t = float(t)
    if math.isnan(t) or t < 0:
        raise DualIndexError(f"scale must lie in [0, ∞], got {t!r}")
    return t


def pv_covariance_multiplier(k: Sequence[float], t: Scale, geom: LatticeGeometry) -> float:
    """Pauli-Villars covariance ĉ_t(k) = 1/(−Δ̂^ε(k) + m² + 1/t); ĉ_0 = 0."""
    a = laplacian_multiplier(k, geom) + geom.mass2
    return float(_pv_from_a(a, _check_scale(t)))


def pv_covariance_symbol(geom: LatticeGeometry, t: Scale) -> np.ndarray:
    return _pv_from_a(mass_symbol(geom), _check_scale(t))


def q_multiplier(k: Sequence[float], t: Scale, geom: LatticeGeometry) -> float:
    """q̂_t(k) = 1/(t(−Δ̂^ε(k) + m²) + 1), the square root of d/dt ĉ_t."""
    a = laplacian_multiplier(k, geom) + geom.mass2
    return float(_q_from_a(a, _check_scale(t)))


def q_symbol(geom: LatticeGeometry, t: Scale) -> np.ndarray:
    return np.asarray(_q_from_a(mass_symbol(geom), _check_scale(t)), dtype=np.float64)


def _q_squared_integral_from_a(a, s: float, t: float):
    # antiderivative of (τa+1)⁻² is −1/(a(τa+1)); written without cancellation
    if math.isinf(t):
        if math.isinf(s):
            return np.zeros_like(a) if isinstance(a, np.ndarray) else 0.0
        return 1.0 / (a * (s * a + 1.0))
    return (t - s) / ((s * a + 1.0) * (t * a + 1.0))


def q_squared_integral(k: Sequence[float], s: Scale, t: Scale, geom: LatticeGeometry) -> float:
    """∫_s^t q̂_τ(k)² dτ in closed form; equals ĉ_t(k) − ĉ_s(k)."""
    s, t = _check_scale(s), _check_scale(t)
    a = laplacian_multiplier(k, geom) + geom.mass2
    return float(_q_squared_integral_from_a(a, s, t))


def covariance_increment_symbol(geom: LatticeGeometry, s: Scale, t: Scale) -> np.ndarray:
    """ĉ_t − ĉ_s = ∫_s^t q̂² on the whole dual set (s ≤ t)."""
    s, t = _check_scale(s), _check_scale(t)
    return np.asarray(_q_squared_integral_from_a(mass_symbol(geom), s, t), dtype=np.float64)


def variance_c_eps(geom: LatticeGeometry) -> float:
    """c_ε = Σ_k ĉ_∞(k), the pointwise variance of the discrete massive GFF."""
    return float(np.sum(1.0 / mass_symbol(geom)))


def _embedding_matrix(n: int, fine_n: int) -> np.ndarray:
    # coarse FFT index → fine FFT index; a Nyquist mode is split between ±n/2
    matrix = np.zeros((fine_n, n))
    for index, mode in enumerate(_modes_1d(n)):
        if n % 2 == 0 and mode == n // 2 and fine_n > n:
            matrix[mode % fine_n, index] = 0.5
            matrix[(-mode) % fine_n, index] = 0.5
        else:
            matrix[mode % fine_n, index] = 1.0
    return matrix


def _restriction_matrix(n: int, fine_n: int) -> np.ndarray:
    fine_modes = np.rint(fft.fftfreq(fine_n, d=1.0 / fine_n)).astype(np.int64)
    matrix = np.zeros((n, fine_n))
    for index, mode in enumerate(_modes_1d(n)):
        matrix[index] = (np.abs(fine_modes) <= n / 2) & ((fine_modes - mode) % n == 0)
    return matrix


def _check_refinement(n: int, fine_n: int):
    if fine_n < n or fine_n % n != 0:
        raise IncompatibleGridError(f"a {fine_n}-site grid does not refine a {n}-site grid")


def embed_trig(f: RealField, fine_n: int) -> RealField:
    """Trigonometric extension I_ε of f, sampled on a finer lattice.

    The spectrum is zero-padded; a coefficient on the Nyquist line is shared
    equally between the two fine modes it aliases, which keeps the extension
    real and leaves the values at the coarse sites unchanged.

    The extension is an isometry on fields without Nyquist content. On even
    lattices in general ‖I_ε f‖² = Σ_k 2^{−ν(k)} |f̂(k)|², where ν(k) counts
    the components of k equal to π/ε; no real extension that keeps the site
    values can also keep the norm of those modes.
    """
    n = f.geometry.n
    _check_refinement(n, fine_n)
    coarse = forward_fft(f).coeffs
    embed = _embedding_matrix(n, fine_n)
    fine_coeffs = embed @ coarse @ embed.T
    values = fft.ifft2(fine_coeffs) * fine_n**2
    return RealField(f.geometry.refined(fine_n), _real_part_checked(values, _sup(f)))


def restrict(f_fine: RealField, coarse_n: int) -> RealField:
    """Projection Π_ε onto the coarse lattice: keep the Fourier modes of Ω_ε*.

    Fine modes on the boundary of the dual square fold onto the coarse Nyquist
    mode, so `restrict(embed_trig(f, N), n) == f`.
    """
    fine_n = f_fine.geometry.n
    _check_refinement(coarse_n, fine_n)
    fine = forward_fft(f_fine).coeffs
    project = _restriction_matrix(coarse_n, fine_n)
    coarse_coeffs = project @ fine @ project.T
    values = fft.ifft2(coarse_coeffs) * coarse_n**2
    return RealField(f_fine.geometry.refined(coarse_n), _real_part_checked(values, _sup(f_fine)))
