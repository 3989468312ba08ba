"""Run configuration files: YAML with the tables model, grid, sampler and analysis."""

import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Type, Union

import yaml

from .exceptions import ConfigFileError
from .forms import (
    AnalysisSettingsForm,
    GridSettingsForm,
    ModelSettingsForm,
    RunSettingsForm,
    SamplerSettingsForm,
    SectionForm,
)
from .models import AnalysisSettings, GridSettings, ModelSettings, RunConfig, SamplerSettings

logger = logging.getLogger(__name__)

TABLES: Dict[str, Type[SectionForm]] = {
    "model": ModelSettingsForm,
    "grid": GridSettingsForm,
    "sampler": SamplerSettingsForm,
    "analysis": AnalysisSettingsForm,
}


def _copy(data: Mapping[str, Any]) -> Dict[str, Any]:
    return {key: dict(value) if isinstance(value, dict) else value for key, value in data.items()}


def assign(data: Dict[str, Any], key: str, value: Any):
    """Set ``table.key`` (or a top-level key) in a configuration mapping in place."""
    path = key.strip().split(".")
    if len(path) == 1:
        data[path[0]] = value
    elif len(path) == 2:
        table = data.setdefault(path[0], {})
        if not isinstance(table, dict):
            raise ConfigFileError(f"{key!r} targets {path[0]!r}, which is not a table")
        table[path[1]] = value
    else:
        raise ConfigFileError(f"configuration key {key!r} is nested too deeply")


def with_values(data: Mapping[str, Any], values: Mapping[str, Any]) -> Dict[str, Any]:
    """A copy of `data` with typed values assigned by dotted key; None values are skipped."""
    result = _copy(data)
    for key, value in values.items():
        if value is not None:
            assign(result, key, value)
    return result


def apply_overrides(data: Mapping[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """
    Apply ``table.key=value`` overrides; values are parsed as YAML scalars.

    Args:
        data: The configuration as read from the file.
        overrides: Assignments such as ``model.n=16`` or ``seed=3``.
    Return:
        A new configuration mapping.
    """
    result = _copy(data)
    for override in overrides:
        key, sep, raw = override.partition("=")
        if not sep or not key.strip():
            raise ConfigFileError(f"override {override!r} is not of the form key=value")
        try:
            value = yaml.safe_load(raw) if raw.strip() else None
        except yaml.YAMLError as ex:
            raise ConfigFileError(f"override {override!r} has an unparseable value") from ex
        assign(result, key, value)
    return result


def _form_errors(form: SectionForm, prefix: str = "") -> Dict[str, List[str]]:
    errors = {}
    for name, messages in form.errors.items():
        if name == "__all__":
            key = prefix or "config"
        else:
            key = f"{prefix}.{name}" if prefix else name
        errors[key] = [str(message) for message in messages]
    return errors


def parse_config(data: Any) -> RunConfig:
    """Validate a configuration mapping and fill in every default."""
    if not isinstance(data, dict):
        raise ConfigFileError("a run configuration must be a table of keys")

    errors: Dict[str, List[str]] = {}
    run_form = RunSettingsForm(data)
    if not run_form.is_valid():
        errors.update(_form_errors(run_form))

    tables = {}
    for name, form_class in TABLES.items():
        table = data.get(name) or {}
        if not isinstance(table, dict):
            continue
        form = form_class(table)
        if form.is_valid():
            tables[name] = form.cleaned_data
        else:
            errors.update(_form_errors(form, name))
    if errors:
        raise ConfigFileError("invalid run configuration", errors)

    top = run_form.cleaned_data
    model, grid, sampler, analysis = (tables[name] for name in TABLES)
    return RunConfig(
        pipeline=top["pipeline"],
        seed=int(top["seed"]),
        out_dir=top["out_dir"],
        workers=top.get("workers"),
        model=ModelSettings(
            n=model["n"], mass2=model["mass2"], poly=tuple(model["poly"]), cutoff_e=model["cutoff_e"]
        ),
        grid=GridSettings(rho=grid["rho"], t_max=grid["tmax"], t_min=grid["tmin"]),
        sampler=SamplerSettings(**sampler),
        analysis=AnalysisSettings(
            **{
                **analysis,
                "alphas": tuple(analysis["alphas"]),
                "moment_exponents": tuple(analysis["moment_exponents"]),
            }
        ),
    )


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """The raw mapping of a YAML configuration file, before validation."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as file:
            data = yaml.safe_load(file)
    except OSError as ex:
        raise ConfigFileError(f"cannot read {path}: {ex.strerror}") from ex
    except yaml.YAMLError as ex:
        raise ConfigFileError(f"{path} is not valid YAML: {ex}") from ex

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigFileError(f"{path} must hold a table of keys")
    return data


def load_config(path: Union[str, Path], overrides: Optional[Sequence[str]] = None) -> RunConfig:
    config = parse_config(apply_overrides(read_config_file(path), overrides or ()))
    logger.debug("Loaded %s pipeline configuration from %s", config.pipeline, path)
    return config
