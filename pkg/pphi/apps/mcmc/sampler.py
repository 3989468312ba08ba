"""Metropolis-adjusted Langevin sampling of the cut-off P(φ)₂ measure.

The target is e^{ℓ(φ)} with ℓ(φ) = −½⟨φ, (−Δ + m²)φ⟩ − v₀^E(φ), written in
the normalised inner product. A proposal is

    φ' = φ + (h/2) C∇ℓ(φ) + √h ξ,   ξ ~ N(0, C),

with C the GFF covariance when preconditioned and the identity otherwise,
and is accepted with the usual Metropolis-Hastings ratio.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings
from scipy import fft

from ...stats import Estimate
from ..gff.sampling import gaussian_from_noise
from ..harness.seeds import rng_for
from ..harness.workers import map_replicas
from ..lattice.models import LatticeGeometry, RealField
from ..lattice.spectral import apply_multiplier, mass_symbol
from ..wick.models import WickPolynomial
from ..wick.potential import v0_cut_and_grad_values, v0_values
from .exceptions import ZeroAcceptanceError
from .models import McmcConfig, McmcResult

logger = logging.getLogger(__name__)

STREAM = "mcmc"

MIN_ACCEPTANCE = 0.01

# Robbins-Monro gain (i + 1)^−ADAPT_DECAY for the log step during burn-in.
ADAPT_DECAY = 0.6

OBSERVABLES = ("l2", "max", "v0")


def _log_target_values(values: np.ndarray, geom: LatticeGeometry, poly: WickPolynomial) -> Tuple[float, np.ndarray]:
    a = mass_symbol(geom)
    stiffness = apply_multiplier(values, a)
    hamiltonian, gradient = v0_cut_and_grad_values(values, poly)
    log_density = -0.5 * float(np.mean(values * stiffness)) - float(hamiltonian)
    return log_density, -stiffness - gradient


def log_target_and_grad(f: RealField, cfg: McmcConfig) -> Tuple[float, RealField]:
    """ℓ(f) up to a constant and its gradient in the normalised inner product."""
    log_density, gradient = _log_target_values(f.values, f.geometry, cfg.polynomial)
    return log_density, RealField(f.geometry, gradient)


def _metric_norm(values: np.ndarray, metric: np.ndarray) -> float:
    # ‖x‖²_{C⁻¹} = Σ_k |x̂(k)|² / C(k)
    n = values.shape[-1]
    coeffs = fft.fft2(values) / (n * n)
    return float(np.sum(np.abs(coeffs) ** 2 / metric))


def field_observables(fields: np.ndarray, poly: WickPolynomial) -> Dict[str, np.ndarray]:
    """⟨f, f⟩, max f and v₀(f) of every field in an (S, n, n) stack."""
    return {
        "l2": np.mean(fields**2, axis=(-2, -1)),
        "max": np.max(fields, axis=(-2, -1)),
        "v0": np.atleast_1d(v0_values(fields, poly)),
    }


def effective_sample_size(series: Sequence[float]) -> float:
    """
    ESS = N / τ with τ from Geyer's initial monotone sequence estimator.

    Autocorrelations come from one FFT; sums of adjacent pairs are truncated
    at the first non-positive pair and forced to be non-increasing.
    """
    x = np.asarray(series, dtype=np.float64)
    count = x.size
    if count < 4:
        return float(count)
    x = x - x.mean()
    size = fft.next_fast_len(2 * count)
    spectrum = fft.rfft(x, size)
    autocovariance = fft.irfft(spectrum * np.conj(spectrum), size)[:count] / count
    if autocovariance[0] <= 0:
        return float(count)
    rho = autocovariance / autocovariance[0]

    pairs = rho[: 2 * (count // 2)].reshape(-1, 2).sum(axis=1)
    negative = np.flatnonzero(pairs <= 0)
    if negative.size:
        pairs = pairs[: negative[0]]
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * float(pairs.sum())
    return float(count / max(tau, 1.0 / math.log10(count)))


def mala_chain(cfg: McmcConfig, initial: Optional[RealField] = None, chain: int = 0) -> McmcResult:
    """
    Run one chain; the stream ("mcmc", chain) of the seed drives every draw.

    The chain starts from `initial`, or from a GFF sample of its own stream.
    Raises ZeroAcceptanceError when fewer than 1% of the burn-in proposals (of
    all proposals without burn-in) were accepted.
    """
    geom = cfg.geometry
    poly = cfg.polynomial
    metric = 1.0 / mass_symbol(geom) if cfg.preconditioned else np.ones(geom.shape)
    rng = rng_for(cfg.seed, STREAM, chain)
    target = settings.PPHI_MALA_TARGET_ACCEPTANCE

    if initial is None:
        current = gaussian_from_noise(rng.standard_normal(geom.shape), 1.0 / mass_symbol(geom))
    else:
        current = np.array(initial.values)
    log_density, gradient = _log_target_values(current, geom, poly)

    log_step = math.log(cfg.step)
    burn_accepted = accepted = 0
    retained = []
    total = cfg.burn_in + cfg.n_samples * cfg.thin
    for i in range(total):
        step = math.exp(log_step)
        forward = current + 0.5 * step * apply_multiplier(gradient, metric)
        proposal = forward + math.sqrt(step) * gaussian_from_noise(rng.standard_normal(geom.shape), metric)
        uniform = rng.random()

        with np.errstate(over="ignore", invalid="ignore"):
            proposed_density, proposed_gradient = _log_target_values(proposal, geom, poly)
            backward = proposal + 0.5 * step * apply_multiplier(proposed_gradient, metric)
            log_ratio = (
                proposed_density
                - log_density
                - (_metric_norm(current - backward, metric) - _metric_norm(proposal - forward, metric)) / (2.0 * step)
            )
        if not math.isfinite(log_ratio):
            log_ratio = -math.inf

        if math.log(uniform) < log_ratio:
            current, log_density, gradient = proposal, proposed_density, proposed_gradient
            if i < cfg.burn_in:
                burn_accepted += 1
            else:
                accepted += 1

        if i < cfg.burn_in:
            if cfg.adapt:
                probability = math.exp(min(log_ratio, 0.0))
                log_step += (probability - target) / (i + 1) ** ADAPT_DECAY
        elif (i - cfg.burn_in + 1) % cfg.thin == 0:
            retained.append(current.copy())

    sampled = cfg.n_samples * cfg.thin
    rate = accepted / sampled
    burn_rate = burn_accepted / cfg.burn_in if cfg.burn_in else rate
    if burn_rate < MIN_ACCEPTANCE:
        raise ZeroAcceptanceError(burn_rate, math.exp(log_step))

    fields = np.stack(retained)
    observables = field_observables(fields, poly)
    ess = {name: effective_sample_size(observables[name]) for name in OBSERVABLES}
    logger.info(
        "Chain %d: acceptance %.3f, step %.4g, ESS %s",
        chain,
        rate,
        math.exp(log_step),
        ", ".join(f"{name}={value:.0f}" for name, value in ess.items()),
    )
    return McmcResult(
        geometry=geom,
        fields=fields,
        observables=observables,
        acceptance_rate=rate,
        burn_in_acceptance=burn_rate,
        step=math.exp(log_step),
        ess=ess,
        chain=chain,
    )


def run_chains(cfg: McmcConfig, chains: int, workers: Optional[int] = None) -> List[McmcResult]:
    return map_replicas(lambda c: mala_chain(cfg, chain=c), range(chains), workers)


def pooled_estimate(results: Sequence[McmcResult], name: str) -> Estimate:
    """Mean of an observable over all chains, with the error from the summed ESS."""
    values = np.concatenate([r.observables[name] for r in results])
    ess = sum(r.ess[name] for r in results)
    return Estimate(float(values.mean()), float(values.std(ddof=1) / math.sqrt(ess)))
