import math
from dataclasses import dataclass, replace
from typing import Sequence, Tuple, Union

from ..lattice.models import LatticeGeometry
from ..lattice.spectral import variance_c_eps
from .exceptions import PolynomialError

NO_CUTOFF = math.inf


def parse_cutoff(value: Union[str, float, int, None]) -> float:
    """A cut-off E from config: a positive number, or "inf" / None for none."""
    if value is None or (isinstance(value, str) and value.strip().lower() in ("inf", "infinity")):
        return NO_CUTOFF
    try:
        cutoff = float(value)
    except (TypeError, ValueError) as ex:
        raise PolynomialError(f"cutoff_e must be a number or 'inf', got {value!r}") from ex
    if math.isnan(cutoff) or cutoff <= 0:
        raise PolynomialError(f"cutoff_e must be positive, got {value!r}")
    return cutoff


@dataclass(frozen=True)
class WickPolynomial:
    """
    Represents the Wick-ordered interaction :P(φ): = Σ_k a_k :φ^k:.

    `coeffs` holds a_1..a_N (there is no constant term). P is either the zero
    polynomial or has even degree N with a_N > 0.
    """

    coeffs: Tuple[float, ...]
    wick_variance: float = 0.0
    cutoff_e: float = NO_CUTOFF

    def __post_init__(self):
        try:
            coeffs = tuple(float(a) for a in self.coeffs)
        except (TypeError, ValueError) as ex:
            raise PolynomialError(f"polynomial coefficients must be numbers: {self.coeffs!r}") from ex
        if not all(math.isfinite(a) for a in coeffs):
            raise PolynomialError("polynomial coefficients must be finite")
        if any(coeffs):
            if coeffs[-1] <= 0:
                raise PolynomialError(f"leading coefficient must be positive, got {coeffs[-1]!r}")
            if len(coeffs) % 2:
                raise PolynomialError(f"degree must be even, got {len(coeffs)}")
        else:
            coeffs = ()

        wick_variance = float(self.wick_variance)
        if not math.isfinite(wick_variance) or wick_variance < 0:
            raise PolynomialError(f"Wick variance must be finite and ≥ 0, got {self.wick_variance!r}")

        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "wick_variance", wick_variance)
        object.__setattr__(self, "cutoff_e", parse_cutoff(self.cutoff_e))

    @classmethod
    def for_geometry(
        cls, coeffs: Sequence[float], geometry: LatticeGeometry, cutoff_e: Union[str, float] = NO_CUTOFF
    ) -> "WickPolynomial":
        """P Wick-ordered with the exact lattice variance c_ε of `geometry`."""
        return cls(coeffs=tuple(coeffs), wick_variance=variance_c_eps(geometry), cutoff_e=cutoff_e)

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def has_cutoff(self) -> bool:
        return not math.isinf(self.cutoff_e)

    def quadratic_coefficient(self) -> float:
        """a₂ when P = a₂φ²; raises otherwise."""
        if self.degree != 2 or self.coeffs[0] != 0:
            raise PolynomialError(f"{self.coeffs!r} is not of the form a₂φ²")
        return self.coeffs[1]

    def with_cutoff(self, cutoff_e: Union[str, float]) -> "WickPolynomial":
        return replace(self, cutoff_e=cutoff_e)

    def as_json(self) -> dict:
        return {
            "poly": list(self.coeffs),
            "wick_variance": self.wick_variance,
            "cutoff_e": "inf" if math.isinf(self.cutoff_e) else self.cutoff_e,
        }
