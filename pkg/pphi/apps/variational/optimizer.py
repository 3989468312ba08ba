"""Stochastic-gradient minimisation of the variational functional over open-loop drifts."""

import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy import fft

from ..flow.models import FlowConfig
from ..gff.sampling import sample_gff_batch
from ..harness.seeds import derive_seed
from ..wick.potential import v0_cut_and_grad_values
from .drift import integration_symbols
from .exceptions import DivergenceError
from .models import BdReport, DriftPath, SgdConfig
from .objective import STREAM, check_drift, bd_objective, reference_log_laplace

logger = logging.getLogger(__name__)

# The run aborts once the objective exceeds its initial value by this many
# multiples of the initial scale.
DIVERGENCE_FACTOR = 10.0


def minimize_open_loop(
    cfg: FlowConfig, sgd: SgdConfig, seed: int, initial: Optional[DriftPath] = None
) -> Tuple[DriftPath, BdReport]:
    """
    Minimise F over deterministic drifts by pathwise stochastic gradients.

    Every step draws a fresh batch of Y_∞ and differentiates
    v₀^E(Y_∞ + I(u)) + ½Σ‖u‖²Δt through the linear map I. The gradient for
    field j is Q_j ∇v₀^E + u_j Δt_j (Q_j the interval multiplier of I); it is
    preconditioned by 1/Δt_j, so a rate of 1 jumps to the batch minimiser of
    the linearised problem.

    Args:
        cfg: Model and grid; `mc_inner` is not used.
        sgd: Step count, rate and batch sizes.
        seed: Master seed of the batches.
        initial: Starting drift, zero by default.

    Return:
        The final drift and its report, evaluated on an independent batch.
        The report keeps the per-step objective trace with its batch standard
        errors, from which `BdReport.trace_monotone` is judged.
    """
    geometry, grid = cfg.geometry, cfg.grid
    if initial is None:
        initial = DriftPath.zeros(grid, geometry)
    check_drift(initial, cfg)

    symbols = integration_symbols(grid, geometry)
    durations = initial.durations[:, np.newaxis, np.newaxis]
    drift = initial.as_array().copy()
    trace = []
    trace_stderr = []
    start = scale = 0.0

    for step in range(sgd.steps):
        samples = sample_gff_batch(geometry, derive_seed(seed, (STREAM, "sgd", step)), sgd.batch)
        shift = fft.ifft2(np.sum(fft.fft2(drift, axes=(-2, -1)) * symbols, axis=0)).real
        hamiltonian, gradient = v0_cut_and_grad_values(samples + shift, cfg.polynomial)
        hamiltonian = np.asarray(hamiltonian)

        action = float(np.sum(np.mean(drift**2, axis=(-2, -1)) * durations[:, 0, 0]))
        value = float(hamiltonian.mean()) + 0.5 * action
        trace.append(value)
        trace_stderr.append(float(hamiltonian.std(ddof=1)) / math.sqrt(sgd.batch))
        if step == 0:
            start = value
            scale = max(abs(value), float(hamiltonian.std()), 1e-8)
        if not math.isfinite(value) or value > start + DIVERGENCE_FACTOR * scale:
            raise DivergenceError(step, value, start)

        mean_gradient = fft.fft2(gradient.mean(axis=0))
        pulled_back = fft.ifft2(symbols * mean_gradient, axes=(-2, -1)).real
        drift = drift - sgd.rate * (drift + pulled_back / durations)
        if step % 50 == 0:
            logger.debug("SGD step %d: objective %.6g, action %.4g", step, value, action)

    final = DriftPath.from_array(grid, geometry, drift)
    evaluation = sgd.evaluation_batch
    report = BdReport(
        f_value=bd_objective(final, cfg, evaluation, derive_seed(seed, (STREAM, "final"))),
        reference_log_laplace=reference_log_laplace(cfg, evaluation, seed),
        trace=tuple(trace),
        action=final.action(),
        trace_stderr=tuple(trace_stderr),
    )
    logger.info(
        "Open-loop objective %.6g ± %.2g after %d steps (action %.4g)",
        report.f_value.value,
        report.f_value.stderr,
        sgd.steps,
        report.action,
    )
    return final, report
