"""Monte-Carlo evaluation of the variational (Boué-Dupuis) functional.

F(u) = E[v₀^E(Y_∞ + I_{0,∞}(u))] + ½ Σ‖u‖²Δt, with Y_∞ a full GFF sample,
is never below −log E[e^{−v₀^E(Y_∞)}] and reaches it at the feedback drift
u_t = −q_t ∇v_t(Φ^P_t) read off the Polchinski flow.
"""

import logging
from dataclasses import replace
from typing import Optional

import numpy as np

from ...stats import Estimate, bootstrap_estimate, log_mean_exp_statistic, mean_estimate
from ..flow.integrator import run_replica
from ..flow.models import CouplingSample, FlowConfig
from ..gff.sampling import sample_gff_batch
from ..harness.seeds import derive_seed
from ..harness.workers import map_replicas
from ..lattice.models import RealField
from ..lattice.spectral import apply_multiplier, q_symbol
from ..wick.potential import v0_cut, v0_cut_values
from .drift import integrated_drift
from .exceptions import DriftGridError, OptimizerConfigError
from .models import BdReport, DriftPath

logger = logging.getLogger(__name__)

STREAM = "variational"


def _check_batch(batch: int, name: str = "batch"):
    if int(batch) != batch or batch < 2:
        raise OptimizerConfigError(f"{name} must be an integer ≥ 2, got {batch!r}")


def check_drift(u: DriftPath, cfg: FlowConfig):
    if u.grid != cfg.grid or u.geometry != cfg.geometry:
        raise DriftGridError("drift and configuration use different grids or lattices")


def bd_objective(u: DriftPath, cfg: FlowConfig, batch: int, seed: int) -> Estimate:
    """F(u) for a deterministic drift, averaged over `batch` fresh samples of Y_∞."""
    _check_batch(batch)
    check_drift(u, cfg)
    samples = sample_gff_batch(cfg.geometry, derive_seed(seed, (STREAM, "objective")), batch)
    shifted = samples + integrated_drift(u).values
    costs = np.asarray(v0_cut_values(shifted, cfg.polynomial)) + 0.5 * u.action()
    return mean_estimate(costs)


def reference_log_laplace(cfg: FlowConfig, batch: int, seed: int, resamples: Optional[int] = None) -> Estimate:
    """−log E[e^{−v₀^E(Y_∞)}] by log-mean-exp, with a bootstrap standard error."""
    _check_batch(batch)
    samples = sample_gff_batch(cfg.geometry, derive_seed(seed, (STREAM, "reference")), batch)
    log_weights = -np.asarray(v0_cut_values(samples, cfg.polynomial), dtype=np.float64)
    options = {} if resamples is None else {"resamples": resamples}
    estimate = bootstrap_estimate(
        log_weights,
        statistic=log_mean_exp_statistic,
        seed=derive_seed(seed, (STREAM, "bootstrap")),
        **options,
    )
    return Estimate(-estimate.value, estimate.stderr)


def feedback_drift(sample: CouplingSample) -> DriftPath:
    """u_{t_j} = −q_{t_j} ∇v_{t_j}(Φ^P_{t_j}) from the gradients recorded by the flow."""
    if not sample.gradients:
        raise DriftGridError("the coupling sample carries no gradient record")
    geometry = sample.geometry
    fields = []
    for j, t in enumerate(sample.grid.interior, start=1):
        drift = -apply_multiplier(sample.gradients[j], q_symbol(geometry, t))
        fields.append(RealField(geometry, drift))
    return DriftPath(sample.grid, tuple(fields))


def feedback_cost(sample: CouplingSample, cfg: FlowConfig) -> float:
    """Realised cost v₀^E(Y_∞ + I_{0,∞}(u)) + ½Σ‖u‖²Δt of the replica's own feedback drift."""
    return _realised_cost(feedback_drift(sample), sample, cfg)


def _realised_cost(u: DriftPath, sample: CouplingSample, cfg: FlowConfig) -> float:
    return v0_cut(sample.terminal_gff + integrated_drift(u), cfg.polynomial) + 0.5 * u.action()


def feedback_objective(
    cfg: FlowConfig,
    replicas: int,
    seed: int,
    workers: Optional[int] = None,
    reference_batch: Optional[int] = None,
) -> BdReport:
    """Average realised cost of the flow's feedback drift over `replicas` flow runs."""
    _check_batch(replicas, "replicas")
    flow_cfg = replace(cfg, seed=seed)

    def cost(replica: int):
        sample = run_replica(flow_cfg, replica)
        u = feedback_drift(sample)
        return _realised_cost(u, sample, cfg), u.action()

    results = map_replicas(cost, range(replicas), workers)
    costs = np.array([c for c, _ in results])
    actions = np.array([a for _, a in results])
    reference = reference_log_laplace(cfg, int(reference_batch or max(4 * replicas, 1000)), seed)
    report = BdReport(
        f_value=mean_estimate(costs),
        reference_log_laplace=reference,
        action=float(actions.mean()),
    )
    logger.info(
        "Feedback objective %.6g ± %.2g against reference %.6g ± %.2g",
        report.f_value.value,
        report.f_value.stderr,
        reference.value,
        reference.stderr,
    )
    return report
