"""Statistics of the difference field and of the coupling over many replicas."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ...stats import Estimate, bonferroni_multiplier, bootstrap_estimate, mean_estimate
from ..harness.seeds import derive_seed
from ..lattice.models import Scale
from ..lattice.spectral import apply_multiplier, q_symbol
from ..norms.spaces import sobolev_norm_values
from .exceptions import EmptySampleError
from .models import CouplingSample

logger = logging.getLogger(__name__)


def _check_samples(samples: Sequence[CouplingSample], minimum: int = 1) -> List[CouplingSample]:
    samples = list(samples)
    if len(samples) < minimum:
        raise EmptySampleError(f"need at least {minimum} coupling samples, got {len(samples)}")
    grids = {sample.grid for sample in samples}
    if len(grids) != 1:
        raise EmptySampleError("coupling samples were produced on different grids")
    return samples


@dataclass(frozen=True)
class DifferenceRecord:
    time: float
    alpha: float
    exponent: float
    moment: Estimate  # E‖Φ^Δ_t‖^r_{H^α}
    continuity: Estimate  # E‖Φ^Δ_t − Φ^Δ_0‖^r_{H^α}

    def as_json(self) -> dict:
        return {
            "time": "inf" if np.isinf(self.time) else self.time,
            "alpha": self.alpha,
            "exponent": self.exponent,
            "moment": self.moment.as_dict(),
            "continuity": self.continuity.as_dict(),
        }


@dataclass(frozen=True)
class DifferenceReport:
    """Moments of the difference field, one record per (grid time, α, exponent)."""

    records: Tuple[DifferenceRecord, ...] = field(repr=False)
    replicas: int

    def curve(self, alpha: float, exponent: float, continuity: bool = False):
        """(times, values, standard errors) of one moment curve in grid order."""
        chosen = [r for r in self.records if r.alpha == alpha and r.exponent == exponent]
        estimates = [r.continuity if continuity else r.moment for r in chosen]
        return (
            np.array([r.time for r in chosen]),
            np.array([e.value for e in estimates]),
            np.array([e.stderr for e in estimates]),
        )

    def continuity_decreasing(self, alpha: float, exponent: float, count: int = 3) -> bool:
        """
        Whether the continuity statistic decreases toward t = 0 on the `count`
        smallest positive grid times, each step allowed its combined
        Bonferroni-widened standard error.
        """
        _, values, errors = self.curve(alpha, exponent, continuity=True)
        values, errors = values[-count - 1 :], errors[-count - 1 :]
        rises = np.diff(values)
        allowance = bonferroni_multiplier(max(1, len(rises))) * np.hypot(errors[1:], errors[:-1])
        return bool(np.all(rises <= allowance))

    def as_json(self) -> dict:
        return {"replicas": self.replicas, "records": [r.as_json() for r in self.records]}


def difference_diagnostics(
    samples: Sequence[CouplingSample],
    alphas: Sequence[float],
    moment_exponents: Sequence[float],
    seed: int = 0,
    resamples: Optional[int] = None,
) -> DifferenceReport:
    """
    Empirical E‖Φ^Δ_t‖^r_{H^α} and E‖Φ^Δ_t − Φ^Δ_0‖^r_{H^α} at every grid time.

    Standard errors come from the bootstrap, which stays honest for the
    small fractional exponents where the moments are heavy-tailed.
    """
    samples = _check_samples(samples)
    grid = samples[0].grid
    geometry = samples[0].geometry
    deltas = np.stack([np.stack([f.values for f in s.phi_delta]) for s in samples])
    drift_to_zero = deltas - deltas[:, -1:, :, :]

    bootstrap = {} if resamples is None else {"resamples": resamples}
    records = []
    for a_index, alpha in enumerate(alphas):
        norms = sobolev_norm_values(deltas, geometry, alpha)
        gaps = sobolev_norm_values(drift_to_zero, geometry, alpha)
        for r_index, exponent in enumerate(moment_exponents):
            for j, time in enumerate(grid.times):
                labels = ("bootstrap", a_index, r_index, j)
                records.append(
                    DifferenceRecord(
                        time=float(time),
                        alpha=float(alpha),
                        exponent=float(exponent),
                        moment=bootstrap_estimate(
                            norms[:, j] ** exponent, seed=derive_seed(seed, labels + ("moment",)), **bootstrap
                        ),
                        continuity=bootstrap_estimate(
                            gaps[:, j] ** exponent, seed=derive_seed(seed, labels + ("continuity",)), **bootstrap
                        ),
                    )
                )
    logger.info("Difference diagnostics over %d replicas and %d grid times", len(samples), len(grid.times))
    return DifferenceReport(records=tuple(records), replicas=len(samples))


def independence_statistic(samples: Sequence[CouplingSample], t: Scale) -> Estimate:
    """
    Empirical E[⟨Y_t, Φ^P_t⟩] with Y_t = Φ^GFF_0 − Φ^GFF_t.

    Y_t is independent of Φ^P_t and centred, so the statistic vanishes up to
    Monte-Carlo error.
    """
    samples = _check_samples(samples, minimum=2)
    values = []
    for sample in samples:
        phi_p, phi_gff, _ = sample.at(t)
        small_scales = sample.terminal_gff - phi_gff
        values.append(small_scales.inner(phi_p))
    return mean_estimate(values)


def drift_integrability(samples: Sequence[CouplingSample]) -> Estimate:
    """
    Empirical mean of Σ_j ‖q_{t_j} ∇v_{t_j}‖²_{L²} (t_j − t_{j+1}) over interior grid times.

    This is the L² action of the feedback drift; it must stay finite and
    stable under refinement of the lattice.
    """
    samples = _check_samples(samples, minimum=2)
    grid = samples[0].grid
    geometry = samples[0].geometry
    actions = []
    for sample in samples:
        if not sample.gradients:
            raise EmptySampleError("coupling samples carry no gradient record")
        action = 0.0
        for j, upper, lower in grid.interval_bounds():
            if j == 0:
                continue
            drift = apply_multiplier(sample.gradients[j], q_symbol(geometry, upper))
            action += float(np.mean(drift**2)) * (upper - lower)
        actions.append(action)
    return mean_estimate(actions)


@dataclass(frozen=True)
class MaxComparison:
    """Per-replica max Φ^P_0 − max Φ^GFF_0 against the bound ‖Φ^Δ_0‖_∞."""

    differences: np.ndarray = field(repr=False)
    bounds: np.ndarray = field(repr=False)

    @property
    def violations(self) -> int:
        return int(np.sum(np.abs(self.differences) > self.bounds + 1e-12))

    @property
    def mean_difference(self) -> Estimate:
        return mean_estimate(self.differences)

    def as_json(self) -> dict:
        return {
            "mean_difference": self.mean_difference.as_dict(),
            "mean_bound": float(np.mean(self.bounds)),
            "violations": self.violations,
        }


def max_comparison(samples: Sequence[CouplingSample]) -> MaxComparison:
    samples = _check_samples(samples, minimum=2)
    differences = np.array([s.terminal.values.max() - s.terminal_gff.values.max() for s in samples])
    bounds = np.array([np.abs(s.terminal_difference.values).max() for s in samples])
    return MaxComparison(differences=differences, bounds=bounds)
