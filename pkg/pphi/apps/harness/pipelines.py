"""
Run orchestration.

A run writes its manifest before anything is sampled, resolves every
automatic default (scale grid, energy cut-off, Wick variance) into it, then
streams one JSON Lines record per replica and statistic. Replicas are
scheduled in batches on the worker pool; the writer only ever sees whole
batches, in replica order, so the statistics file is byte-identical for a
given configuration whatever the worker count.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings
from django.utils import timezone

from ... import __version__
from ...exceptions import PPhiError
from ..extremes.exceptions import DegenerateSampleError, DomainError
from ..extremes.fitting import gumbel_fit, levy_distance, location_mixture_gain
from ..extremes.maxima import m_eps, max_records, summarize_records
from ..flow.diagnostics import difference_diagnostics, drift_integrability, independence_statistic, max_comparison
from ..flow.integrator import default_cutoff_e, run_flow
from ..flow.models import CouplingSample, FlowConfig
from ..gff.io import write_scale_fields
from ..gff.sampling import STREAM as GFF_STREAM
from ..gff.sampling import TERMINAL_STREAM as GFF_TERMINAL_STREAM
from ..gff.sampling import default_grid, sample_gff_batch
from ..lattice.models import LatticeGeometry, RealField
from ..mcmc.models import McmcConfig
from ..mcmc.sampler import OBSERVABLES, field_observables, pooled_estimate, run_chains
from ..mcmc.sampler import STREAM as MCMC_STREAM
from ..variational.models import SgdConfig
from ..variational.objective import feedback_objective
from ..variational.optimizer import minimize_open_loop
from ..wick.models import NO_CUTOFF, WickPolynomial
from .models import RunConfig, RunManifest
from .outputs import RunDirectory, StatisticsWriter
from .seeds import derive_seed

logger = logging.getLogger(__name__)

FLOW_STREAM = "flow"
PATHS_DIRECTORY = "paths"


@dataclass(frozen=True)
class RunContext:
    config: RunConfig
    flow: FlowConfig
    directory: RunDirectory

    @property
    def geometry(self) -> LatticeGeometry:
        return self.flow.geometry

    @property
    def polynomial(self) -> WickPolynomial:
        return self.flow.polynomial


def resolve_flow_config(config: RunConfig) -> Tuple[FlowConfig, dict]:
    """Build the model from a run configuration, resolving every automatic default."""
    model, grid_settings = config.model, config.grid
    geometry = LatticeGeometry(n=model.n, mass2=model.mass2)
    grid = default_grid(geometry, grid_settings.rho, grid_settings.t_max, grid_settings.t_min)
    polynomial = WickPolynomial.for_geometry(model.poly, geometry)

    cutoff = model.cutoff_e
    if cutoff is None:
        cutoff = NO_CUTOFF if polynomial.is_zero else default_cutoff_e(geometry, polynomial, config.seed)
    polynomial = polynomial.with_cutoff(cutoff)

    flow = FlowConfig(
        geometry=geometry,
        polynomial=polynomial,
        grid=grid,
        mc_inner=config.sampler.mc_inner,
        seed=config.seed,
        common_random_numbers=config.sampler.common_random_numbers,
    )
    resolved = {
        "epsilon": geometry.epsilon,
        "c_eps": polynomial.wick_variance,
        "cutoff_e": "inf" if math.isinf(polynomial.cutoff_e) else polynomial.cutoff_e,
        "t_max": grid.interior[0],
        "t_min": grid.interior[-1],
        "grid": grid.as_json(),
        "streams": {
            "gff": "derive_seed(seed, ['gff', replica, interval])",
            "gff-terminal": "derive_seed(seed, ['gff-terminal', replica])",
            "flow": "derive_seed(seed, ['flow', replica, interval])",
            "mcmc": "derive_seed(seed, ['mcmc', chain])",
        },
    }
    return flow, resolved


def seed_table(config: RunConfig) -> List[Dict[str, int]]:
    """The stream keys of every replica (or chain), as recorded in the manifest."""
    seed = config.seed
    if config.pipeline == "sample" and config.sampler.method == "mcmc":
        return [{"chain": c, "mcmc": derive_seed(seed, (MCMC_STREAM, c))} for c in range(config.sampler.chains)]
    if config.pipeline == "sample" and config.sampler.method == "gff":
        return [
            {"replica": r, "gff-terminal": derive_seed(seed, (GFF_TERMINAL_STREAM, r))}
            for r in range(config.sampler.replicas)
        ]
    return [
        {
            "replica": r,
            "gff": derive_seed(seed, (GFF_STREAM, r, 0)),
            "flow": derive_seed(seed, (FLOW_STREAM, r, 0)),
        }
        for r in range(config.sampler.replicas)
    ]


def _batches(total: int) -> Iterator[Tuple[int, int]]:
    size = max(1, int(settings.PPHI_REPLICA_BATCH))
    for start in range(0, total, size):
        yield start, min(size, total - start)


def _observable_records(fields: np.ndarray, polynomial: WickPolynomial, start: int, **extra) -> List[dict]:
    observables = field_observables(fields, polynomial)
    return [
        {"replica": start + i, "statistic": name, "value": float(observables[name][i]), **extra}
        for i in range(fields.shape[0])
        for name in OBSERVABLES
    ]


def _max_records(context: RunContext, fields: np.ndarray, start: int) -> List[dict]:
    records = []
    for record in max_records(fields, context.geometry, start=start):
        records.append({"replica": record.replica, "statistic": "centered_max", "value": record.centered})
        records.append({"replica": record.replica, "statistic": "z", "value": record.z_statistic})
    return records


def _extremes_summary(context: RunContext, fields: np.ndarray) -> dict:
    records = max_records(fields, context.geometry)
    summary: dict = {"by_epsilon": {repr(eps): entry for eps, entry in summarize_records(records).items()}}
    centered = [r.centered for r in records]
    try:
        summary["gumbel"] = gumbel_fit(centered).as_json()
        summary["mixture"] = location_mixture_gain(centered).as_json()
    except DegenerateSampleError as ex:
        logger.warning("Skipping the Gumbel fit: %s", ex)
        summary["gumbel"] = None
    return summary


def _dump_paths(context: RunContext, samples: Sequence[CouplingSample]):
    root = context.directory.root / PATHS_DIRECTORY
    for sample in samples:
        replica = root / f"replica_{sample.replica:06d}"
        for name, kind, fields in (
            ("p", "polchinski_path", sample.phi_p),
            ("gff", "gff_path", sample.phi_gff),
            ("delta", "difference_path", sample.phi_delta),
        ):
            write_scale_fields(
                fields,
                sample.grid,
                replica / name,
                kind,
                context.config.seed,
                sample.replica,
                context.directory.compress,
            )


def _max_levy_distance(context: RunContext, samples: Sequence[CouplingSample]) -> Optional[float]:
    """Lévy distance between the laws of the centred maxima of Φ^P_0 and Φ^GFF_0."""
    try:
        centring = m_eps(context.geometry.epsilon)
    except DomainError as ex:
        logger.warning("Skipping the Lévy distance of the maxima: %s", ex)
        return None
    p = [s.terminal.values.max() - centring for s in samples]
    gff = [s.terminal_gff.values.max() - centring for s in samples]
    return levy_distance(p, gff)


def _sample_gff(context: RunContext, stream: StatisticsWriter) -> int:
    config = context.config
    maxima = []
    for start, count in _batches(config.sampler.replicas):
        fields = sample_gff_batch(context.geometry, config.seed, count, start)
        stream.write_many(_observable_records(fields, context.polynomial, start))
        if config.analysis.extremes:
            stream.write_many(_max_records(context, fields, start))
            maxima.append(fields)
        if config.analysis.dump_fields:
            for i, values in enumerate(fields):
                context.directory.write_field(RealField(context.geometry, values), f"replica_{start + i:06d}")
    if maxima:
        context.directory.write_summary("extremes", _extremes_summary(context, np.concatenate(maxima)))
    return config.sampler.replicas


def _sample_polchinski(context: RunContext, stream: StatisticsWriter) -> int:
    config = context.config
    terminals = []
    for start, count in _batches(config.sampler.replicas):
        samples = run_flow(context.flow, count, config.workers, start)
        fields = np.stack([s.terminal.values for s in samples])
        stream.write_many(_observable_records(fields, context.polynomial, start))
        stream.write_many(
            {"replica": start + i, "statistic": "delta_sup", "value": float(np.abs(s.terminal_difference.values).max())}
            for i, s in enumerate(samples)
        )
        if config.analysis.extremes:
            stream.write_many(_max_records(context, fields, start))
            terminals.append(fields)
        if config.analysis.dump_fields:
            for i, sample in enumerate(samples):
                context.directory.write_field(sample.terminal, f"replica_{start + i:06d}_p")
                context.directory.write_field(sample.terminal_difference, f"replica_{start + i:06d}_delta")
        if config.analysis.dump_paths:
            _dump_paths(context, samples)
        logger.debug("Flow replicas %d-%d done", start, start + count - 1)
    if terminals:
        context.directory.write_summary("extremes", _extremes_summary(context, np.concatenate(terminals)))
    return config.sampler.replicas


def mcmc_config(context: RunContext) -> McmcConfig:
    sampler = context.config.sampler
    return McmcConfig(
        geometry=context.geometry,
        polynomial=context.polynomial,
        step=sampler.step,
        burn_in=sampler.burn_in,
        thin=sampler.thin,
        n_samples=sampler.n_samples,
        seed=context.config.seed,
        adapt=sampler.adapt,
        preconditioned=sampler.preconditioned,
    )


def _sample_mcmc(context: RunContext, stream: StatisticsWriter) -> int:
    config = context.config
    results = run_chains(mcmc_config(context), config.sampler.chains, config.workers)
    per_chain = config.sampler.n_samples
    for result in results:
        stream.write_many(
            _observable_records(result.fields, context.polynomial, result.chain * per_chain, chain=result.chain)
        )
    summary = {
        "chains": [r.diagnostics() for r in results],
        "pooled": {name: pooled_estimate(results, name).as_dict() for name in OBSERVABLES},
    }
    context.directory.write_summary("mcmc", summary)
    if config.analysis.extremes:
        fields = np.concatenate([r.fields for r in results])
        context.directory.write_summary("extremes", _extremes_summary(context, fields))
    return per_chain * config.sampler.chains


def _sample(context: RunContext, stream: StatisticsWriter) -> int:
    method = context.config.sampler.method
    if method == "gff":
        return _sample_gff(context, stream)
    if method == "mcmc":
        return _sample_mcmc(context, stream)
    return _sample_polchinski(context, stream)


def _coupling(context: RunContext, stream: StatisticsWriter) -> int:
    config = context.config
    samples = run_flow(context.flow, config.sampler.replicas, config.workers)
    fields = np.stack([s.terminal.values for s in samples])
    stream.write_many(_observable_records(fields, context.polynomial, 0))

    comparison = max_comparison(samples)
    if config.analysis.dump_paths:
        _dump_paths(context, samples)
    stream.write_many(
        {"replica": r, "statistic": "max_difference", "value": float(comparison.differences[r])}
        for r in range(len(samples))
    )
    interior = context.flow.grid.interior
    scales = sorted({interior[len(interior) // 3], interior[(2 * len(interior)) // 3]}, reverse=True)
    report = difference_diagnostics(
        samples,
        config.analysis.alphas,
        config.analysis.moment_exponents,
        seed=derive_seed(config.seed, ("diagnostics",)),
    )
    summary = {
        "difference": report.as_json(),
        "independence": [{"t": t, **independence_statistic(samples, t).as_dict()} for t in scales],
        "drift_integrability": drift_integrability(samples).as_dict(),
        "max_comparison": comparison.as_json(),
        "levy_distance": _max_levy_distance(context, samples),
    }
    context.directory.write_summary("coupling", summary)
    if config.analysis.extremes:
        context.directory.write_summary("extremes", _extremes_summary(context, fields))
    return len(samples)


def _variational(context: RunContext, stream: StatisticsWriter) -> int:
    config = context.config
    analysis = config.analysis
    summary = {}
    units = 0
    if analysis.variational in ("open-loop", "both"):
        sgd = SgdConfig(steps=analysis.sgd_steps, rate=analysis.sgd_rate, batch=analysis.sgd_batch)
        drift, report = minimize_open_loop(context.flow, sgd, derive_seed(config.seed, ("open-loop",)))
        stream.write_many(
            {"step": step, "statistic": "open_loop_objective", "value": value}
            for step, value in enumerate(report.trace)
        )
        summary["open_loop"] = {**report.as_json(), "drift_action": drift.action()}
        units += analysis.sgd_steps * analysis.sgd_batch
    if analysis.variational in ("feedback", "both"):
        report = feedback_objective(
            context.flow,
            config.sampler.replicas,
            derive_seed(config.seed, ("feedback",)),
            config.workers,
            analysis.reference_batch,
        )
        summary["feedback"] = report.as_json()
        units += config.sampler.replicas
    context.directory.write_summary("variational", summary)
    return units


PIPELINE_RUNNERS: Dict[str, Callable[[RunContext, StatisticsWriter], int]] = {
    "sample": _sample,
    "coupling": _coupling,
    "variational": _variational,
}


def _finish(manifest: RunManifest, status: str, began: float, units: int = 0):
    manifest.status = status
    manifest.finished = timezone.now().isoformat()
    manifest.elapsed = time.perf_counter() - began
    if units and manifest.elapsed > 0:
        manifest.throughput = units / manifest.elapsed


def run(config: RunConfig, directory: Optional[RunDirectory] = None) -> RunManifest:
    """
    Execute the configured pipeline and leave its artifacts in `config.out_dir`.

    Raises whatever the pipeline raised after marking the manifest "aborted"
    with the error's type and message.
    """
    if directory is None:
        directory = RunDirectory(config.out_dir)
    manifest = RunManifest(config=config.as_json(), version=__version__, started=timezone.now().isoformat())
    directory.write_manifest(manifest)
    began = time.perf_counter()

    try:
        flow, resolved = resolve_flow_config(config)
        manifest.resolved = resolved
        manifest.seeds = seed_table(config)
        directory.write_manifest(manifest)
        logger.info(
            "Running %s pipeline: n=%d, %d grid intervals, E=%s",
            config.pipeline,
            flow.geometry.n,
            flow.grid.intervals,
            resolved["cutoff_e"],
        )

        context = RunContext(config=config, flow=flow, directory=directory)
        with directory.statistics() as stream:
            units = PIPELINE_RUNNERS[config.pipeline](context, stream)
        manifest.outputs = sorted(
            str(path.relative_to(directory.root))
            for path in directory.root.rglob("*")
            if path.is_file() and path != directory.manifest_path
        )
    except BaseException as ex:
        manifest.error = {"type": type(ex).__name__, "message": str(ex)}
        _finish(manifest, "aborted", began)
        directory.write_manifest(manifest)
        if isinstance(ex, PPhiError):
            logger.error("Run aborted: %s", ex)
        raise

    _finish(manifest, "complete", began, units)
    directory.write_manifest(manifest)
    logger.info("Run complete in %.1f s", manifest.elapsed)
    return manifest
