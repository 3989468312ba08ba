import math
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

from .exceptions import GeometryError

# Scale value standing for t = ∞ (Φ_∞ = 0, c_∞ = (−Δ+m²)⁻¹). Every consumer
# branches on math.isinf rather than treating it as a large number.
INFINITE_SCALE = math.inf

Scale = Union[int, float]


@dataclass(frozen=True)
class LatticeGeometry:
    """The discretised unit torus Ω_ε with n sites per side, ε = 1/n, and mass m²."""

    n: int
    mass2: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise GeometryError(f"need at least 2 sites per side, got {self.n!r}")
        if not math.isfinite(self.mass2) or self.mass2 <= 0:
            raise GeometryError(f"mass2 must be positive, got {self.mass2!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "mass2", float(self.mass2))

    @property
    def epsilon(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n, self.n)

    @property
    def sites(self) -> int:
        return self.n * self.n

    def refined(self, fine_n: int) -> "LatticeGeometry":
        return LatticeGeometry(n=fine_n, mass2=self.mass2)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class RealField:
    """A real field on Ω_ε, stored as an (n, n) array indexed [i, j] ↔ x = ε(i, j).

    The row-major flattening of `values` is the project's serialised order.
    """

    geometry: LatticeGeometry
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.size != self.geometry.sites:
            raise GeometryError(
                f"field has {values.size} values, lattice has {self.geometry.sites} sites"
            )
        values = values.reshape(self.geometry.shape)
        if not np.all(np.isfinite(values)):
            raise GeometryError("field values must be finite")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def zeros(cls, geometry: LatticeGeometry) -> "RealField":
        return cls(geometry, np.zeros(geometry.shape))

    @classmethod
    def constant(cls, geometry: LatticeGeometry, value: float) -> "RealField":
        return cls(geometry, np.full(geometry.shape, float(value)))

    def _other_values(self, other: "RealField") -> np.ndarray:
        if other.geometry != self.geometry:
            raise GeometryError("fields live on different lattices")
        return other.values

    def __add__(self, other: "RealField") -> "RealField":
        return RealField(self.geometry, self.values + self._other_values(other))

    def __sub__(self, other: "RealField") -> "RealField":
        return RealField(self.geometry, self.values - self._other_values(other))

    def __neg__(self) -> "RealField":
        return RealField(self.geometry, -self.values)

    def __mul__(self, scalar: float) -> "RealField":
        return RealField(self.geometry, self.values * float(scalar))

    __rmul__ = __mul__

    def inner(self, other: "RealField") -> float:
        """The normalised inner product ⟨f, g⟩ = ε² Σ_x f(x) g(x)."""
        return float(np.mean(self.values * self._other_values(other)))

    def translated(self, shift: Tuple[int, int]) -> "RealField":
        return RealField(self.geometry, np.roll(self.values, shift, axis=(0, 1)))


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients f̂(k), k ∈ Ω_ε*, stored in standard FFT layout.

    Entry [a, b] holds the coefficient of k = 2π·(m_a, m_b) where m is given by
    `spectral.dual_modes`; the Nyquist index n/2 is taken as +n/2.
    """

    geometry: LatticeGeometry
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.complex128)
        if coeffs.shape != self.geometry.shape:
            raise GeometryError(
                f"coefficient array has shape {coeffs.shape}, expected {self.geometry.shape}"
            )
        object.__setattr__(self, "coeffs", _frozen(coeffs))

    def coeff(self, mode: Tuple[int, int]) -> complex:
        """The coefficient of k = 2π·mode (integer mode, any representative mod n)."""
        n = self.geometry.n
        return complex(self.coeffs[mode[0] % n, mode[1] % n])
