"""Wick calculus, the energy cut-off χ_E and the cut-off Hamiltonian.

Wick powers use the scaled Hermite recurrence
    :f^0: = 1,  :f^1: = f,  :f^{k+1}: = f·:f^k: − k·c·:f^{k−1}:
which equals c^{k/2} He_k(f/√c) for c > 0 and reduces to f^k at c = 0.

Gradients follow the normalised convention ⟨∇F, g⟩ = ε² Σ_x ∇F(x) g(x) = D F(g),
so ∇v₀ is the pointwise Wick derivative :P':(f).

The array functions accept a single field or a stack of fields (lattice on
the last two axes); Hamiltonians are returned per field.
"""

from typing import List, Sequence, Union

import numpy as np

from ..lattice.models import RealField
from .exceptions import PolynomialError
from .models import WickPolynomial

Real = Union[float, np.ndarray]


def hermite(n: int, x: Real) -> Real:
    """Probabilists' Hermite polynomial He_n(x)."""
    if n < 0:
        raise PolynomialError(f"Hermite index must be ≥ 0, got {n}")
    x = np.asarray(x, dtype=np.float64)
    previous, current = np.ones_like(x), x
    if n == 0:
        result = previous
    else:
        for k in range(1, n):
            previous, current = current, x * current - k * previous
        result = current
    return float(result) if result.ndim == 0 else result


def wick_series(values: np.ndarray, c: float, degree: int) -> List[np.ndarray]:
    """[:f^0:, :f^1:, …, :f^degree:] with Wick variance c."""
    if c < 0:
        raise PolynomialError(f"Wick variance must be ≥ 0, got {c}")
    values = np.asarray(values, dtype=np.float64)
    series = [np.ones_like(values), values]
    for k in range(1, degree):
        series.append(values * series[k] - k * c * series[k - 1])
    return series[: degree + 1]


def wick_power(f: RealField, n: int, c: float) -> RealField:
    """:f^n:_c pointwise."""
    if n < 1:
        raise PolynomialError(f"Wick power must be ≥ 1, got {n}")
    return RealField(f.geometry, wick_series(f.values, c, n)[n])


def wick_combination(values: np.ndarray, coeffs: Sequence[float], c: float) -> np.ndarray:
    """Σ_k a_k :f^k: for coefficients a_1..a_N (no parity constraint on the list)."""
    values = np.asarray(values, dtype=np.float64)
    result = np.zeros_like(values)
    if not coeffs:
        return result
    series = wick_series(values, c, len(coeffs))
    for k, a in enumerate(coeffs, start=1):
        if a:
            result += a * series[k]
    return result


def wick_derivative(values: np.ndarray, coeffs: Sequence[float], c: float) -> np.ndarray:
    """Σ_k k·a_k :f^{k−1}:, using d/dφ :φ^k: = k :φ^{k−1}:."""
    values = np.asarray(values, dtype=np.float64)
    result = np.zeros_like(values)
    if not coeffs:
        return result
    series = wick_series(values, c, len(coeffs))
    for k, a in enumerate(coeffs, start=1):
        if a:
            result += k * a * series[k - 1]
    return result


def wick_polynomial_field(f: RealField, poly: WickPolynomial) -> RealField:
    return RealField(f.geometry, wick_combination(f.values, poly.coeffs, poly.wick_variance))


def _site_mean(values: np.ndarray) -> Real:
    result = values.mean(axis=(-2, -1))
    return float(result) if np.ndim(result) == 0 else result


def v0_values(values: np.ndarray, poly: WickPolynomial) -> Real:
    return _site_mean(wick_combination(values, poly.coeffs, poly.wick_variance))


def v0(f: RealField, poly: WickPolynomial) -> float:
    """v₀(f) = ε² Σ_x :P(f(x)):."""
    return float(v0_values(f.values, poly))


# The cut-off bridges x = E/2 to x = 3E/2 with slope 1 − S(s), s = (x − E/2)/E
# and S(s) = 6s⁵ − 15s⁴ + 10s³ the quintic smoothstep; χ'' = −30 s²(1−s)²/E.


def _bridge_variable(x: np.ndarray, cutoff_e: float) -> np.ndarray:
    return np.clip((x - cutoff_e / 2.0) / cutoff_e, 0.0, 1.0)


def chi_e(x: Real, cutoff_e: float) -> Real:
    """The concave C² cut-off: x below E/2, saturating at E from 3E/2 on."""
    if cutoff_e <= 0:
        raise PolynomialError(f"cut-off must be positive, got {cutoff_e}")
    x = np.asarray(x, dtype=np.float64)
    if np.isinf(cutoff_e):
        result = x
    else:
        s = _bridge_variable(x, cutoff_e)
        bridge = cutoff_e / 2.0 + cutoff_e * (s - s**6 + 3.0 * s**5 - 2.5 * s**4)
        result = np.where(x <= cutoff_e / 2.0, x, bridge)
    return float(result) if result.ndim == 0 else result


def chi_e_prime(x: Real, cutoff_e: float) -> Real:
    if cutoff_e <= 0:
        raise PolynomialError(f"cut-off must be positive, got {cutoff_e}")
    x = np.asarray(x, dtype=np.float64)
    if np.isinf(cutoff_e):
        result = np.ones_like(x)
    else:
        s = _bridge_variable(x, cutoff_e)
        result = 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)
    return float(result) if result.ndim == 0 else result


def chi_e_second(x: Real, cutoff_e: float) -> Real:
    x = np.asarray(x, dtype=np.float64)
    if np.isinf(cutoff_e):
        result = np.zeros_like(x)
    else:
        s = _bridge_variable(x, cutoff_e)
        result = -30.0 * s**2 * (1.0 - s) ** 2 / cutoff_e
    return float(result) if result.ndim == 0 else result


def v0_cut_values(values: np.ndarray, poly: WickPolynomial) -> Real:
    return chi_e(v0_values(values, poly), poly.cutoff_e)


def v0_cut(f: RealField, poly: WickPolynomial) -> float:
    """v₀^E = χ_E ∘ v₀."""
    return float(v0_cut_values(f.values, poly))


def grad_v0_cut_values(values: np.ndarray, poly: WickPolynomial) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    gradient = wick_derivative(values, poly.coeffs, poly.wick_variance)
    if poly.has_cutoff and not poly.is_zero:
        slope = np.asarray(chi_e_prime(v0_values(values, poly), poly.cutoff_e))
        gradient = gradient * slope[..., np.newaxis, np.newaxis]
    return gradient


def grad_v0_cut(f: RealField, poly: WickPolynomial) -> RealField:
    """∇v₀^E(f) = χ_E'(v₀(f)) · :P':(f)."""
    return RealField(f.geometry, grad_v0_cut_values(f.values, poly))


def v0_cut_and_grad_values(values: np.ndarray, poly: WickPolynomial):
    """(v₀^E, ∇v₀^E) sharing one Wick series evaluation."""
    values = np.asarray(values, dtype=np.float64)
    if poly.is_zero:
        zeros = np.zeros(values.shape[:-2]) if values.ndim > 2 else 0.0
        return zeros, np.zeros_like(values)

    series = wick_series(values, poly.wick_variance, poly.degree)
    density = np.zeros_like(values)
    gradient = np.zeros_like(values)
    for k, a in enumerate(poly.coeffs, start=1):
        if a:
            density += a * series[k]
            gradient += k * a * series[k - 1]
    hamiltonian = density.mean(axis=(-2, -1))
    if poly.has_cutoff:
        slope = np.asarray(chi_e_prime(hamiltonian, poly.cutoff_e))
        gradient = gradient * slope[..., np.newaxis, np.newaxis]
        hamiltonian = chi_e(hamiltonian, poly.cutoff_e)
    if np.ndim(hamiltonian) == 0:
        hamiltonian = float(hamiltonian)
    return hamiltonian, gradient
