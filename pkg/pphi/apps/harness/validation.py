"""
Built-in acceptance checks, run by the ``validate`` command.

The "quick" preset finishes in minutes on a laptop; "full" runs the
desk-scale acceptance sizes (the extremes check alone takes hours).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate

from ...stats import bonferroni_multiplier, mean_estimate
from ..extremes.fitting import gumbel_fit
from ..extremes.maxima import TAIL_RATE, max_records
from ..flow.gaussian import quadratic_log_laplace, quadratic_mode_variance, quadratic_scheme_variance
from ..flow.diagnostics import difference_diagnostics, drift_integrability
from ..flow.integrator import default_cutoff_e, run_flow, terminal_fields
from ..flow.models import FlowConfig
from ..gff.models import ScaleGrid
from ..gff.sampling import default_grid, sample_gff_batch
from ..lattice.models import INFINITE_SCALE, LatticeGeometry, RealField
from ..lattice.spectral import covariance_increment_symbol, forward_fft, inverse_fft, mass_symbol, pv_covariance_symbol
from ..mcmc.models import McmcConfig
from ..mcmc.sampler import OBSERVABLES, field_observables, pooled_estimate, run_chains
from ..variational.models import DriftPath
from ..variational.objective import bd_objective, feedback_objective, reference_log_laplace
from ..wick.models import WickPolynomial
from .seeds import derive_seed, rng_for

logger = logging.getLogger(__name__)

QUARTIC = (0.0, 0.5, 0.0, 0.1)

# Large enough that the cut-off never binds for the quadratic model.
QUADRATIC_CUTOFF = 1e6

# Bias of the self-normalised inner Monte-Carlo gradient tolerated on top of
# the statistical error in the quadratic check.
INNER_BIAS_ALLOWANCE = 0.03

# Largest time-discretisation bias of the quadratic check's grid; the
# comparison with the exact variances must fit inside INNER_BIAS_ALLOWANCE.
SCHEME_BIAS_LIMIT = 0.015
MAX_REFINEMENTS = 6

# Allowed max/min ratio of difference-field statistics across lattice spacings.
SWEEP_FACTOR = 2.0

# Fields per batch when only maxima or spectra are kept.
BATCH = 256

PRESETS: Dict[str, Dict[str, Optional[Dict[str, Any]]]] = {
    "quick": {
        "spectral": {"n": 16},
        "gff": {"n": 8, "replicas": 2000},
        "quadratic": {"n": 4, "a2": 0.5, "rho": 0.9, "replicas": 400, "mc_inner": 32, "reference_batch": 4000},
        "comparison": {
            "n": 4,
            "rho": 0.7,
            "replicas": 200,
            "mc_inner": 32,
            "chains": 2,
            "burn_in": 500,
            "thin": 2,
            "n_samples": 2000,
        },
        "difference": {"ns": [4, 8], "replicas": 100, "mc_inner": 16, "rho": 0.7},
        "bd_bound": {"n": 4, "drifts": 5, "batch": 400, "reference_batch": 4000},
        "feedback": {"n": 4, "replicas": 100, "mc_inner": 32, "reference_batch": 4000},
        "gumbel": {"draws": 100_000},
        "extremes": None,
    },
    "full": {
        "spectral": {"n": 64},
        "gff": {"n": 16, "replicas": 10_000},
        "quadratic": {"n": 8, "a2": 0.5, "rho": 0.9, "replicas": 10_000, "mc_inner": 64, "reference_batch": 100_000},
        "comparison": {
            "n": 8,
            "rho": 0.9,
            "replicas": 2000,
            "mc_inner": 64,
            "chains": 4,
            "burn_in": 2000,
            "thin": 5,
            "n_samples": 5000,
        },
        "difference": {"ns": [8, 16, 32], "replicas": 200, "mc_inner": 32, "rho": 0.7},
        "bd_bound": {"n": 8, "drifts": 20, "batch": 2000, "reference_batch": 100_000},
        "feedback": {"n": 8, "replicas": 1000, "mc_inner": 64, "reference_batch": 100_000},
        "gumbel": {"draws": 100_000},
        "extremes": {"ns": [32, 64], "replicas": 5000, "mc_inner": 64, "rho": 0.7},
    },
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)
    table: List[Dict[str, Any]] = field(default_factory=list)

    def as_json(self) -> dict:
        result = {"name": self.name, "passed": bool(self.passed), **self.details}
        if self.table:
            result["table"] = self.table
        return result


def _quartic_config(n: int, seed: int, mc_inner: int, rho: Optional[float] = None) -> FlowConfig:
    geometry = LatticeGeometry(n=n, mass2=1.0)
    polynomial = WickPolynomial.for_geometry(QUARTIC, geometry)
    polynomial = polynomial.with_cutoff(default_cutoff_e(geometry, polynomial, seed))
    return FlowConfig(geometry, polynomial, default_grid(geometry, rho), mc_inner, seed)


def _mode_power(fields: np.ndarray) -> np.ndarray:
    n = fields.shape[-1]
    power = np.abs(np.fft.fft2(fields, axes=(-2, -1)) / (n * n)) ** 2
    return power.reshape(power.shape[0], -1)


def _within(expected: np.ndarray, power: np.ndarray, relative_allowance: float = 0.0) -> Dict[str, Any]:
    mean, stderr = mean_estimate(power)
    multiplier = bonferroni_multiplier(mean.size)
    excess = np.abs(mean - expected) - relative_allowance * np.abs(expected)
    z = np.maximum(excess, 0.0) / stderr
    return {"max_z": float(z.max()), "multiplier": multiplier, "passed": bool(np.all(z <= multiplier))}


def check_spectral(seed: int, workers: Optional[int], n: int) -> CheckResult:
    """Parseval, the FFT round trip and ∫_s^t q̂² = ĉ_t − ĉ_s against quadrature."""
    geometry = LatticeGeometry(n=n, mass2=1.0)
    values = rng_for(seed, "validate", "spectral").standard_normal(geometry.shape)
    spectral = forward_fft(RealField(geometry, values))
    parseval = abs(float(np.mean(values**2)) - float(np.sum(np.abs(spectral.coeffs) ** 2)))
    round_trip = float(np.max(np.abs(inverse_fft(spectral).values - values)))

    a = mass_symbol(geometry).ravel()
    quadrature = 0.0
    for s, t in ((0.0, 0.1), (0.1, 2.0), (2.0, INFINITE_SCALE)):
        closed = covariance_increment_symbol(geometry, s, t).ravel()
        for index in range(0, a.size, max(1, a.size // 32)):
            value, _ = integrate.quad(lambda tau, k=index: (tau * a[k] + 1.0) ** -2, s, t, epsabs=1e-15, epsrel=1e-12)
            quadrature = max(quadrature, abs(value - closed[index]) / closed[index])
    completeness = float(
        np.max(np.abs(covariance_increment_symbol(geometry, 0.0, INFINITE_SCALE) * mass_symbol(geometry) - 1.0))
    )

    details = {"parseval": parseval, "round_trip": round_trip, "quadrature": quadrature, "completeness": completeness}
    passed = max(parseval, round_trip, completeness) < 1e-12 and quadrature < 1e-8
    return CheckResult("spectral identities", passed, details)


def check_gff(seed: int, workers: Optional[int], n: int, replicas: int) -> CheckResult:
    """Per-mode variances of sampled GFF fields against ĉ_∞."""
    geometry = LatticeGeometry(n=n, mass2=1.0)
    seed = derive_seed(seed, ("validate", "gff"))
    power = np.concatenate(
        [
            _mode_power(sample_gff_batch(geometry, seed, min(BATCH, replicas - start), start))
            for start in range(0, replicas, BATCH)
        ]
    )
    details = _within(pv_covariance_symbol(geometry, INFINITE_SCALE).ravel(), power)
    return CheckResult("GFF mode variances", details.pop("passed"), {"n": n, "replicas": replicas, **details})


def _quadratic_grid(geometry: LatticeGeometry, a2: float, rho: float) -> Tuple[ScaleGrid, float]:
    """The default grid, refined by ρ → √ρ until its scheme bias is below SCHEME_BIAS_LIMIT."""
    exact = quadratic_mode_variance(geometry, a2)
    for _ in range(MAX_REFINEMENTS):
        grid = default_grid(geometry, rho)
        bias = float(np.max(np.abs(quadratic_scheme_variance(geometry, a2, grid) / exact - 1.0)))
        if bias <= SCHEME_BIAS_LIMIT:
            break
        logger.debug("Scheme bias %.3g at rho=%.4g; refining", bias, rho)
        rho = math.sqrt(rho)
    return grid, bias


def check_quadratic(  # pylint: disable=too-many-arguments
    seed: int, workers: Optional[int], n: int, a2: float, rho: float, replicas: int, mc_inner: int, reference_batch: int
) -> CheckResult:
    """The flow and the variational reference for P = a₂φ² against their closed forms."""
    geometry = LatticeGeometry(n=n, mass2=1.0)
    polynomial = WickPolynomial.for_geometry((0.0, a2), geometry, QUADRATIC_CUTOFF)
    grid, scheme_bias = _quadratic_grid(geometry, a2, rho)
    cfg = FlowConfig(geometry, polynomial, grid, mc_inner, derive_seed(seed, ("validate", "quadratic")))

    power = _mode_power(terminal_fields(cfg, replicas, workers))
    exact = _within(quadratic_mode_variance(geometry, a2).ravel(), power, INNER_BIAS_ALLOWANCE)
    scheme = _within(quadratic_scheme_variance(geometry, a2, grid).ravel(), power, INNER_BIAS_ALLOWANCE)
    details: Dict[str, Any] = {
        "rho": grid.rho,
        "scheme_bias": scheme_bias,
        "exact": exact,
        "scheme": scheme,
    }

    reference = reference_log_laplace(cfg, reference_batch, cfg.seed)
    closed = quadratic_log_laplace(geometry, a2)
    reference_ok = abs(reference.value - closed) <= bonferroni_multiplier(2) * reference.stderr
    details["reference"] = {"estimate": reference.as_dict(), "closed_form": closed}
    return CheckResult("quadratic closed forms", exact["passed"] and scheme["passed"] and reference_ok, details)


def check_comparison(  # pylint: disable=too-many-arguments
    seed: int,
    workers: Optional[int],
    n: int,
    rho: float,
    replicas: int,
    mc_inner: int,
    chains: int,
    burn_in: int,
    thin: int,
    n_samples: int,
) -> CheckResult:
    """Quartic model: Polchinski-flow against MALA estimates of the same observables."""
    cfg = _quartic_config(n, derive_seed(seed, ("validate", "comparison")), mc_inner, rho)
    flow_observables = field_observables(terminal_fields(cfg, replicas, workers), cfg.polynomial)

    mcmc = McmcConfig(
        geometry=cfg.geometry,
        polynomial=cfg.polynomial,
        burn_in=burn_in,
        thin=thin,
        n_samples=n_samples,
        seed=cfg.seed,
    )
    results = run_chains(mcmc, chains, workers)

    multiplier = bonferroni_multiplier(len(OBSERVABLES))
    table = []
    for name in OBSERVABLES:
        flow = mean_estimate(flow_observables[name])
        chain = pooled_estimate(results, name)
        difference = flow - chain
        table.append(
            {
                "statistic": name,
                "flow": flow.as_dict(),
                "mcmc": chain.as_dict(),
                "z": abs(difference.value) / difference.stderr if difference.stderr > 0 else math.inf,
            }
        )
    passed = all(row["z"] <= multiplier for row in table)
    details = {"n": n, "cutoff_e": cfg.polynomial.cutoff_e, "multiplier": multiplier}
    return CheckResult("flow against MCMC", passed, details, table)


def _spread(values: List[float]) -> float:
    """max/min of positive values; ∞ when any is zero or not finite."""
    low, high = min(values), max(values)
    if not (low > 0 and math.isfinite(high)):
        return math.inf
    return high / low


def check_difference(  # pylint: disable=too-many-arguments,too-many-locals
    seed: int,
    workers: Optional[int],
    ns: List[int],
    replicas: int,
    mc_inner: int,
    rho: float,
    alpha: float = 1.0,
    exponent: float = 1.0,
) -> CheckResult:
    """
    Difference-field trends across lattice spacings for the quartic model.

    E‖Φ^Δ_t‖²_{H¹} (its supremum over t and its value at t = 0) and the
    drift action agree within SWEEP_FACTOR across ε; on every lattice the
    continuity statistic E‖Φ^Δ_t − Φ^Δ_0‖^r_{H^α} decreases toward t = 0 on
    the three smallest positive grid times.
    """
    table = []
    for n in ns:
        cfg = _quartic_config(n, derive_seed(seed, ("validate", "difference", n)), mc_inner, rho)
        samples = run_flow(cfg, replicas, workers)
        report = difference_diagnostics(
            samples, alphas=sorted({1.0, alpha}), moment_exponents=sorted({2.0, exponent}), seed=cfg.seed
        )
        _, h1, _ = report.curve(1.0, 2.0)
        table.append(
            {
                "n": n,
                "h1_sup": float(h1.max()),
                "h1_terminal": float(h1[-1]),
                "continuity_decreasing": report.continuity_decreasing(alpha, exponent),
                "drift_action": drift_integrability(samples).as_dict(),
            }
        )
        logger.debug("Difference sweep at n=%d: %s", n, table[-1])

    spreads = {
        "h1_sup": _spread([row["h1_sup"] for row in table]),
        "h1_terminal": _spread([row["h1_terminal"] for row in table]),
        "drift_action": _spread([row["drift_action"]["value"] for row in table]),
    }
    passed = all(s <= SWEEP_FACTOR for s in spreads.values()) and all(row["continuity_decreasing"] for row in table)
    details = {"alpha": alpha, "exponent": exponent, "sweep_factor": SWEEP_FACTOR, "spreads": spreads}
    return CheckResult("difference-field trends", passed, details, table)


def check_bd_bound(
    seed: int, workers: Optional[int], n: int, drifts: int, batch: int, reference_batch: int
) -> CheckResult:
    """F(u) ≥ −log E[e^{−v₀}] for random deterministic drifts, up to Monte-Carlo error."""
    cfg = _quartic_config(n, derive_seed(seed, ("validate", "bd")), 2)
    reference = reference_log_laplace(cfg, reference_batch, cfg.seed)
    shape = DriftPath.zeros(cfg.grid, cfg.geometry).as_array().shape
    rng = rng_for(cfg.seed, "validate", "drifts")

    multiplier = bonferroni_multiplier(drifts)
    table = []
    for i in range(drifts):
        u = DriftPath.from_array(cfg.grid, cfg.geometry, rng.standard_normal(shape))
        value = bd_objective(u, cfg, batch, derive_seed(cfg.seed, ("drift", i)))
        gap = value - reference
        table.append({"drift": i, "f_value": value.as_dict(), "z": gap.value / gap.stderr})
    passed = all(row["z"] >= -multiplier for row in table)
    return CheckResult("variational lower bound", passed, {"reference": reference.as_dict()}, table)


def check_feedback(seed: int, workers: Optional[int], n: int, replicas: int, mc_inner: int, reference_batch: int):
    """The flow's own feedback drift attains the variational infimum up to 10%."""
    cfg = _quartic_config(n, derive_seed(seed, ("validate", "feedback")), mc_inner)
    report = feedback_objective(cfg, replicas, cfg.seed, workers, reference_batch)
    gap = report.gap
    slack = bonferroni_multiplier(1) * gap.stderr + 0.1 * abs(report.reference_log_laplace.value)
    return CheckResult("feedback drift gap", abs(gap.value) <= slack, report.as_json())


def check_gumbel(seed: int, workers: Optional[int], draws: int) -> CheckResult:
    samples = rng_for(seed, "validate", "gumbel").gumbel(0.0, 1.0, draws)
    fit = gumbel_fit(samples)
    passed = abs(fit.location) <= 0.02 and abs(fit.scale - 1.0) <= 0.02
    return CheckResult("Gumbel fit of synthetic maxima", passed, fit.as_json())


def check_extremes(seed: int, workers: Optional[int], ns: List[int], replicas: int, mc_inner: int, rho: float):
    """Right tail of the centred maximum: scale near 1/√(8π), fit improving as ε shrinks."""
    table = []
    for n in ns:
        cfg = _quartic_config(n, derive_seed(seed, ("validate", "extremes", n)), mc_inner, rho)
        centered = []
        for start in range(0, replicas, BATCH):
            fields = terminal_fields(cfg, min(BATCH, replicas - start), workers, start)
            centered += [r.centered for r in max_records(fields, cfg.geometry, martingale=False)]
            logger.debug("Extremes at n=%d: %d of %d replicas", n, start + len(fields), replicas)
        table.append({"n": n, **gumbel_fit(centered).as_json()})

    target = 1.0 / TAIL_RATE
    # two-sided 95% Kolmogorov band for the difference of two KS distances
    band = 1.36 * math.sqrt(2.0 / replicas)
    scale_ok = abs(table[-1]["beta"] / target - 1.0) <= 0.25
    ks_ok = all(b["ks_distance"] <= a["ks_distance"] + band for a, b in zip(table, table[1:]))
    return CheckResult("extremes tail rate", scale_ok and ks_ok, {"target_beta": target, "ks_band": band}, table)


CHECKS: Dict[str, Callable[..., CheckResult]] = {
    "spectral": check_spectral,
    "gff": check_gff,
    "quadratic": check_quadratic,
    "comparison": check_comparison,
    "difference": check_difference,
    "bd_bound": check_bd_bound,
    "feedback": check_feedback,
    "gumbel": check_gumbel,
    "extremes": check_extremes,
}


def validate(preset: str = "quick", seed: int = 0, workers: Optional[int] = None) -> List[CheckResult]:
    """Run every check the preset enables, in a fixed order."""
    results = []
    for name, parameters in PRESETS[preset].items():
        if parameters is None:
            continue
        logger.info("Validation check %s", name)
        result = CHECKS[name](seed, workers, **parameters)
        logger.info("%s: %s", result.name, "passed" if result.passed else "FAILED")
        results.append(result)
    return results
