import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from ..gff.models import ScaleGrid
from ..lattice.models import LatticeGeometry, RealField, Scale
from ..harness.seeds import check_seed
from ..wick.models import WickPolynomial
from .exceptions import FlowConfigError

# Coupling identity Φ^P = Φ^Δ + Φ^GFF is checked to this absolute accuracy.
IDENTITY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class FlowConfig:
    """
    Everything the Polchinski flow needs besides the Gaussian path.

    `mc_inner` is the number of Gaussian fields averaged per gradient
    estimate. With `common_random_numbers` the same inner noise is reused at
    every scale step of a replica instead of a fresh stream per step.
    """

    geometry: LatticeGeometry
    polynomial: WickPolynomial
    grid: ScaleGrid
    mc_inner: int
    seed: int
    common_random_numbers: bool = False

    def __post_init__(self):
        if isinstance(self.mc_inner, bool) or int(self.mc_inner) != self.mc_inner or self.mc_inner < 2:
            raise FlowConfigError(f"mc_inner must be an integer ≥ 2, got {self.mc_inner!r}")
        object.__setattr__(self, "mc_inner", int(self.mc_inner))
        object.__setattr__(self, "seed", check_seed(self.seed))

    def require_finite_cutoff(self):
        if not self.polynomial.is_zero and math.isinf(self.polynomial.cutoff_e):
            raise FlowConfigError("the flow SDE needs a finite energy cut-off E")


@dataclass(frozen=True)
class CouplingSample:
    """
    Represents one replica of the coupled triple (Φ^P, Φ^GFF, Φ^Δ) on a scale grid.

    `gradients[j]` is the gradient estimate ∇v_{t_j}(Φ^P_{t_j}) that drove
    interval j; the variational feedback drift is built from it.
    """

    grid: ScaleGrid
    phi_p: Tuple[RealField, ...] = field(repr=False)
    phi_gff: Tuple[RealField, ...] = field(repr=False)
    phi_delta: Tuple[RealField, ...] = field(repr=False)
    gradients: Tuple[RealField, ...] = field(repr=False, default=())
    replica: int = 0
    seed: int = 0

    def __post_init__(self):
        count = len(self.grid.times)
        for name in ("phi_p", "phi_gff", "phi_delta"):
            fields = tuple(getattr(self, name))
            if len(fields) != count:
                raise FlowConfigError(f"{name} has {len(fields)} fields for {count} grid times")
            object.__setattr__(self, name, fields)
        if self.gradients and len(self.gradients) != self.grid.intervals:
            raise FlowConfigError(
                f"{len(self.gradients)} gradients for {self.grid.intervals} intervals"
            )
        object.__setattr__(self, "gradients", tuple(self.gradients))

        if np.any(self.phi_p[0].values != 0) or np.any(self.phi_delta[0].values != 0):
            raise FlowConfigError("Φ^P and Φ^Δ must vanish at t = ∞")
        for j, (p, delta, gff) in enumerate(zip(self.phi_p, self.phi_delta, self.phi_gff)):
            error = np.max(np.abs(p.values - delta.values - gff.values))
            if error > IDENTITY_TOLERANCE:
                raise FlowConfigError(f"coupling identity broken by {error:.3g} at grid index {j}")

    @property
    def geometry(self) -> LatticeGeometry:
        return self.phi_p[0].geometry

    def at(self, t: Scale) -> Tuple[RealField, RealField, RealField]:
        """(Φ^P_t, Φ^GFF_t, Φ^Δ_t)"""
        j = self.grid.index(t)
        return self.phi_p[j], self.phi_gff[j], self.phi_delta[j]

    @property
    def terminal(self) -> RealField:
        return self.phi_p[-1]

    @property
    def terminal_difference(self) -> RealField:
        return self.phi_delta[-1]

    @property
    def terminal_gff(self) -> RealField:
        return self.phi_gff[-1]
