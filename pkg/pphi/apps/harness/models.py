import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

PIPELINES = ("sample", "coupling", "variational")
METHODS = ("gff", "polchinski", "mcmc")
VARIATIONAL_MODES = ("open-loop", "feedback", "both")


def _json_number(value: Optional[float]):
    if value is None:
        return "auto"
    if math.isinf(value):
        return "inf"
    return value


@dataclass(frozen=True)
class ModelSettings:
    n: int
    mass2: float
    poly: Tuple[float, ...] = ()
    cutoff_e: Optional[float] = None  # None resolves by the pilot rule

    def as_json(self) -> dict:
        return {"n": self.n, "mass2": self.mass2, "poly": list(self.poly), "cutoff_e": _json_number(self.cutoff_e)}


@dataclass(frozen=True)
class GridSettings:
    rho: float
    t_max: Optional[float] = None
    t_min: Optional[float] = None

    def as_json(self) -> dict:
        return {"rho": self.rho, "tmax": _json_number(self.t_max), "tmin": _json_number(self.t_min)}


@dataclass(frozen=True)
class SamplerSettings:
    method: str = "polchinski"
    replicas: int = 100
    mc_inner: int = 64
    common_random_numbers: bool = False
    chains: int = 4
    step: float = 0.5
    burn_in: int = 1000
    thin: int = 1
    n_samples: int = 1000
    adapt: bool = True
    preconditioned: bool = True

    def as_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AnalysisSettings:
    alphas: Tuple[float, ...] = (0.0, 0.5, 1.0)
    moment_exponents: Tuple[float, ...] = (2.0,)
    extremes: bool = False
    dump_fields: bool = False
    dump_paths: bool = False
    variational: str = "both"
    sgd_steps: int = 200
    sgd_rate: float = 0.5
    sgd_batch: int = 64
    reference_batch: int = 4096

    def as_json(self) -> dict:
        data = asdict(self)
        data["alphas"] = list(self.alphas)
        data["moment_exponents"] = list(self.moment_exponents)
        return data


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run: every default the file left out is filled in."""

    pipeline: str
    seed: int
    out_dir: str
    model: ModelSettings
    grid: GridSettings
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    workers: Optional[int] = None

    def as_json(self) -> dict:
        return {
            "pipeline": self.pipeline,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "workers": self.workers,
            "model": self.model.as_json(),
            "grid": self.grid.as_json(),
            "sampler": self.sampler.as_json(),
            "analysis": self.analysis.as_json(),
        }

    def canonical(self) -> str:
        return json.dumps(self.as_json(), sort_keys=True, separators=(",", ":"))


@dataclass
class RunManifest:
    """
    Everything needed to reproduce a run and judge whether it finished.

    The manifest is written before any sampling with status "incomplete" and
    rewritten when the run completes or aborts.
    """

    config: Dict[str, Any]
    version: str
    started: str
    status: str = "incomplete"
    resolved: Dict[str, Any] = field(default_factory=dict)
    seeds: List[Dict[str, int]] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    finished: Optional[str] = None
    elapsed: Optional[float] = None
    throughput: Optional[float] = None
    error: Optional[Dict[str, str]] = None

    def as_json(self) -> dict:
        return asdict(self)
