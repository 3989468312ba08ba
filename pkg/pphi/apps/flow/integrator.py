"""Backward Euler integration of the Polchinski SDE on a scale grid.

Going from t_j down to t_{j+1}, the Gaussian part is the exact increment of
the path and the drift is frozen at t_j:

    Φ^Δ_{t_{j+1}} = Φ^Δ_{t_j} − (ĉ_{t_j} − ĉ_{t_{j+1}}) ∇v_{t_j}(Φ^P_{t_j})
    Φ^P_{t_{j+1}} = Φ^Δ_{t_{j+1}} + Φ^GFF_{t_{j+1}}

so the coupling identity holds exactly. The operator ĉ_{t_j} − ĉ_{t_{j+1}} is
the integral of ċ over the interval, also for the first one from ∞.
"""

import logging
from typing import List, Optional

import numpy as np
from django.conf import settings

from ..gff.models import GffPath
from ..gff.sampling import sample_gff_batch, sample_scale_path
from ..harness.seeds import derive_seed
from ..harness.workers import map_replicas
from ..lattice.models import LatticeGeometry, RealField
from ..lattice.spectral import apply_multiplier, covariance_increment_symbol
from ..wick.models import WickPolynomial
from ..wick.potential import v0_values
from .estimator import estimate_gradient
from .exceptions import FlowConfigError, NonFiniteFieldError
from .models import CouplingSample, FlowConfig

logger = logging.getLogger(__name__)

STREAM = "flow"


def step_noise_seed(cfg: FlowConfig, replica: int, j: int) -> int:
    """Seed of the inner Monte-Carlo noise for scale step j of a replica."""
    if cfg.common_random_numbers:
        return derive_seed(cfg.seed, (STREAM, replica))
    return derive_seed(cfg.seed, (STREAM, replica, j))


def integrate_backward(cfg: FlowConfig, gff_path: GffPath) -> CouplingSample:
    """Run the flow from t = ∞ to 0 along one sampled GFF path."""
    cfg.require_finite_cutoff()
    if gff_path.grid != cfg.grid:
        raise FlowConfigError("the GFF path was sampled on a different scale grid")
    if gff_path.geometry != cfg.geometry:
        raise FlowConfigError("the GFF path lives on a different lattice")

    geom = cfg.geometry
    replica = gff_path.replica
    zero = RealField.zeros(geom)
    phi_p: List[RealField] = [zero]
    phi_delta: List[RealField] = [zero]
    gradients: List[RealField] = []
    delta = np.zeros(geom.shape)

    for j, upper, lower in cfg.grid.interval_bounds():
        estimate = estimate_gradient(phi_p[-1], upper, cfg, step_noise_seed(cfg, replica, j))
        gradients.append(estimate.gradient)
        if not cfg.polynomial.is_zero:
            drift = apply_multiplier(estimate.gradient.values, covariance_increment_symbol(geom, lower, upper))
            delta = delta - drift
        if not np.all(np.isfinite(delta)):
            raise NonFiniteFieldError(j + 1, lower)

        gff = gff_path.fields[j + 1]
        phi_delta.append(RealField(geom, delta))
        phi_p.append(RealField(geom, delta + gff.values))
        logger.debug("replica %d step %d (t=%.4g): ESS %.1f", replica, j, lower, estimate.ess)

    return CouplingSample(
        grid=cfg.grid,
        phi_p=tuple(phi_p),
        phi_gff=gff_path.fields,
        phi_delta=tuple(phi_delta),
        gradients=tuple(gradients),
        replica=replica,
        seed=cfg.seed,
    )


def run_replica(cfg: FlowConfig, replica: int) -> CouplingSample:
    """Sample the GFF path of `replica` from the master seed and integrate along it."""
    path = sample_scale_path(cfg.geometry, cfg.grid, cfg.seed, replica)
    return integrate_backward(cfg, path)


def run_flow(
    cfg: FlowConfig, replicas: int, workers: Optional[int] = None, start: int = 0
) -> List[CouplingSample]:
    return map_replicas(lambda r: run_replica(cfg, r), range(start, start + replicas), workers)


def terminal_fields(
    cfg: FlowConfig, replicas: int, workers: Optional[int] = None, start: int = 0
) -> np.ndarray:
    """Φ₀^P of each replica as an (R, n, n) stack, without keeping the paths."""
    fields = map_replicas(
        lambda r: run_replica(cfg, r).terminal.values, range(start, start + replicas), workers
    )
    return np.stack(fields)


def default_cutoff_e(
    geom: LatticeGeometry,
    polynomial: WickPolynomial,
    seed: int,
    pilot: Optional[int] = None,
) -> float:
    """
    Energy cut-off dominating typical Hamiltonian values.

    E is PPHI_CUTOFF_FACTOR times the PPHI_CUTOFF_QUANTILE quantile of v₀ over a
    pilot batch of GFF samples (at least 1 before scaling).
    """
    pilot = int(pilot or settings.PPHI_CUTOFF_PILOT)
    if pilot < 2:
        raise FlowConfigError(f"pilot batch needs at least 2 samples, got {pilot}")
    samples = sample_gff_batch(geom, derive_seed(seed, ("pilot",)), pilot)
    values = np.atleast_1d(v0_values(samples, polynomial))
    level = float(np.quantile(values, settings.PPHI_CUTOFF_QUANTILE))
    cutoff = settings.PPHI_CUTOFF_FACTOR * max(level, 1.0)
    logger.info("Resolved cut-off E = %.6g from %d pilot samples", cutoff, pilot)
    return cutoff
