import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from ..harness.seeds import check_seed
from ..lattice.models import LatticeGeometry, RealField
from ..wick.models import WickPolynomial
from .exceptions import McmcConfigError


@dataclass(frozen=True)
class McmcConfig:
    """
    Settings of a Metropolis-adjusted Langevin chain for e^{−v₀^E(φ)} ν^GFF(dφ).

    With `preconditioned` the Langevin dynamics run in the metric of the GFF
    covariance; `adapt` tunes the step during burn-in towards the target
    acceptance rate and freezes it afterwards.
    """

    geometry: LatticeGeometry
    polynomial: WickPolynomial
    step: float = 0.5
    burn_in: int = 1000
    thin: int = 1
    n_samples: int = 1000
    seed: int = 0
    adapt: bool = True
    preconditioned: bool = True

    def __post_init__(self):
        if not math.isfinite(self.step) or self.step <= 0:
            raise McmcConfigError(f"step must be positive, got {self.step!r}")
        for name, minimum in (("burn_in", 0), ("thin", 1), ("n_samples", 1)):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < minimum:
                raise McmcConfigError(f"{name} must be an integer ≥ {minimum}, got {value!r}")
            object.__setattr__(self, name, int(value))
        object.__setattr__(self, "seed", check_seed(self.seed))


@dataclass(frozen=True)
class McmcResult:
    """The retained states of one chain with their observables and diagnostics."""

    geometry: LatticeGeometry
    fields: np.ndarray = field(repr=False)
    observables: Dict[str, np.ndarray] = field(repr=False)
    acceptance_rate: float
    burn_in_acceptance: float
    step: float
    ess: Dict[str, float]
    chain: int = 0

    def __post_init__(self):
        self.fields.setflags(write=False)

    @property
    def samples(self) -> List[RealField]:
        return [RealField(self.geometry, values) for values in self.fields]

    def diagnostics(self) -> dict:
        return {
            "chain": self.chain,
            "acceptance_rate": self.acceptance_rate,
            "burn_in_acceptance": self.burn_in_acceptance,
            "step": self.step,
            "ess": dict(self.ess),
        }
