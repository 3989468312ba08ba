"""Monte-Carlo gradient of the renormalised potential.

∇v_t(φ) is the Gaussian average of ∇v₀^E(φ+ζ) under the weight e^{−v₀^E(φ+ζ)},
ζ having spectral variance ĉ_t. The estimate is the self-normalised ratio of
two sample means. The weights are accumulated chunk by chunk in log space
against a running maximum, so only `PPHI_MC_CHUNK` fields are alive at once
and underflow of every weight is impossible.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from django.conf import settings

from ..gff.sampling import gaussian_from_noise
from ..harness.seeds import rng_for
from ..lattice.models import RealField, Scale
from ..lattice.spectral import pv_covariance_symbol
from ..wick.potential import v0_cut_and_grad_values
from .exceptions import DegenerateWeightsError
from .models import FlowConfig

logger = logging.getLogger(__name__)

STREAM = "zeta"

MIN_EFFECTIVE_SAMPLES = 2.0


@dataclass(frozen=True)
class GradientEstimate:
    """A gradient estimate with its per-site standard error and weight diagnostics."""

    gradient: RealField
    stderr: np.ndarray = field(repr=False)
    ess: float
    potential: float  # v_t(φ) = −log E[e^{−v₀^E(φ+ζ)}]


class _WeightedSums:
    # Σw, Σw², Σw·g, Σw²·g, Σw²·g², all relative to e^{shift}.

    def __init__(self, shape):
        self.shift = -math.inf
        self.count = 0
        self.weight = 0.0
        self.weight2 = 0.0
        self.first = np.zeros(shape)
        self.cross = np.zeros(shape)
        self.second = np.zeros(shape)

    def add(self, log_weights: np.ndarray, gradients: np.ndarray):
        top = float(np.max(log_weights))
        if top > self.shift:
            factor = math.exp(self.shift - top) if math.isfinite(self.shift) else 0.0
            self.weight *= factor
            self.first *= factor
            self.weight2 *= factor * factor
            self.cross *= factor * factor
            self.second *= factor * factor
            self.shift = top

        weights = np.exp(log_weights - self.shift)
        squared = weights * weights
        self.count += weights.size
        self.weight += float(weights.sum())
        self.weight2 += float(squared.sum())
        self.first += np.tensordot(weights, gradients, axes=1)
        self.cross += np.tensordot(squared, gradients, axes=1)
        self.second += np.tensordot(squared, gradients * gradients, axes=1)

    @property
    def ess(self) -> float:
        return self.weight * self.weight / self.weight2

    def mean(self) -> np.ndarray:
        return self.first / self.weight

    def stderr(self) -> np.ndarray:
        mean = self.mean()
        spread = self.second - 2.0 * mean * self.cross + mean * mean * self.weight2
        return np.sqrt(np.maximum(spread, 0.0)) / self.weight

    def log_mean_weight(self) -> float:
        return self.shift + math.log(self.weight) - math.log(self.count)


def estimate_gradient(
    phi: RealField, t: Scale, cfg: FlowConfig, noise_seed: int, chunk: Optional[int] = None
) -> GradientEstimate:
    """
    Estimate ∇v_t(φ) from `cfg.mc_inner` Gaussian fields.

    Args:
        phi: The field at which the gradient is taken.
        t: The scale; t = ∞ averages over the full GFF.
        cfg: Flow configuration providing the polynomial and the sample count.
        noise_seed: Seed of the inner Gaussian stream; the estimate is a
            deterministic function of it.
        chunk: Fields per batch, defaults to PPHI_MC_CHUNK. Only the
            summation order depends on it.

    Return:
        The estimate with per-site standard errors, ESS and v_t(φ).
    """
    geom = phi.geometry
    if cfg.polynomial.is_zero:
        zeros = RealField.zeros(geom)
        return GradientEstimate(zeros, np.zeros(geom.shape), float(cfg.mc_inner), 0.0)

    chunk = max(1, int(chunk or settings.PPHI_MC_CHUNK))
    symbol = pv_covariance_symbol(geom, t)
    rng = rng_for(noise_seed, STREAM)
    sums = _WeightedSums(geom.shape)
    remaining = cfg.mc_inner
    while remaining > 0:
        size = min(chunk, remaining)
        zeta = gaussian_from_noise(rng.standard_normal((size,) + geom.shape), symbol)
        hamiltonian, gradients = v0_cut_and_grad_values(phi.values + zeta, cfg.polynomial)
        sums.add(-np.asarray(hamiltonian), gradients)
        remaining -= size

    ess = sums.ess
    if not ess >= MIN_EFFECTIVE_SAMPLES:
        raise DegenerateWeightsError(ess, float(t))
    if ess < 0.1 * cfg.mc_inner:
        logger.warning("Low effective sample size %.1f of %d at t=%.4g", ess, cfg.mc_inner, t)
    return GradientEstimate(
        gradient=RealField(geom, sums.mean()),
        stderr=sums.stderr(),
        ess=ess,
        potential=-sums.log_mean_weight(),
    )


def grad_v_t_estimate(phi: RealField, t: Scale, cfg: FlowConfig, noise_seed: int) -> RealField:
    """∇v_t^E(φ) as the self-normalised Gaussian average of ∇v₀^E(φ+ζ)."""
    return estimate_gradient(phi, t, cfg, noise_seed).gradient
