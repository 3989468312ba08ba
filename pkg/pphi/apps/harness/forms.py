"""Validation of the tables of a run configuration file."""

import math
from typing import Any, Dict, List, Mapping, Optional

from django import forms
from django.conf import settings

from ..wick.exceptions import PolynomialError
from ..wick.models import WickPolynomial, parse_cutoff
from .models import METHODS, PIPELINES, VARIATIONAL_MODES

AUTO = "auto"


class FloatListField(forms.Field):
    """A list of finite floats, given as a YAML sequence or a comma-separated string."""

    def to_python(self, value: Any) -> List[float]:
        if value in self.empty_values:
            return []
        if isinstance(value, str):
            value = [item for item in value.split(",") if item.strip()]
        if not isinstance(value, (list, tuple)):
            raise forms.ValidationError("Enter a list of numbers.")
        try:
            numbers = [float(item) for item in value]
        except (TypeError, ValueError) as ex:
            raise forms.ValidationError("Enter a list of numbers.") from ex
        if not all(math.isfinite(x) for x in numbers):
            raise forms.ValidationError("Numbers must be finite.")
        return numbers


class OptionalScaleField(forms.Field):
    """A positive number, or "auto"."""

    def to_python(self, value: Any) -> Optional[float]:
        if value in self.empty_values or (isinstance(value, str) and value.strip().lower() == AUTO):
            return None
        try:
            number = float(value)
        except (TypeError, ValueError) as ex:
            raise forms.ValidationError('Enter a number or "auto".') from ex
        if not math.isfinite(number) or number <= 0:
            raise forms.ValidationError("Enter a positive finite number.")
        return number


class SectionForm(forms.Form):
    """
    A form over one table of the configuration file.

    Missing keys take the field's initial value; keys the form does not know
    are errors, so typos never pass silently.
    """

    def __init__(self, data: Optional[Mapping[str, Any]] = None, **kwargs):
        data = dict(data or {})
        self.unknown_keys = sorted(set(data) - set(self.base_fields))
        defaults = {name: f.initial for name, f in self.base_fields.items() if f.initial is not None}
        super().__init__(data={**defaults, **data}, **kwargs)

    def clean(self) -> Dict[str, Any]:
        cleaned_data = super().clean()
        assert cleaned_data is not None
        for key in self.unknown_keys:
            self.add_error(None, f"Unknown key {key!r}")
        return cleaned_data


class ModelSettingsForm(SectionForm):
    n = forms.IntegerField(min_value=2)
    mass2 = forms.FloatField(initial=1.0)
    poly = FloatListField(required=False, initial=[])
    cutoff_e = forms.CharField(required=False, initial=AUTO)

    def clean(self) -> Dict[str, Any]:
        cleaned_data = super().clean()

        mass2 = cleaned_data.get("mass2")
        if mass2 is not None and not (math.isfinite(mass2) and mass2 > 0):
            self.add_error("mass2", "The mass must be positive.")

        if "poly" in cleaned_data:
            try:
                cleaned_data["poly"] = list(WickPolynomial(coeffs=tuple(cleaned_data["poly"])).coeffs)
            except PolynomialError as ex:
                self.add_error("poly", str(ex))

        cutoff = cleaned_data.get("cutoff_e")
        if cutoff is not None:
            if cutoff.strip().lower() in ("", AUTO):
                cleaned_data["cutoff_e"] = None
            else:
                try:
                    cleaned_data["cutoff_e"] = parse_cutoff(cutoff)
                except PolynomialError as ex:
                    self.add_error("cutoff_e", str(ex))
        return cleaned_data


class GridSettingsForm(SectionForm):
    rho = forms.FloatField(required=False)
    tmax = OptionalScaleField(required=False, initial=AUTO)
    tmin = OptionalScaleField(required=False, initial=AUTO)

    def clean(self) -> Dict[str, Any]:
        cleaned_data = super().clean()

        rho = cleaned_data.get("rho")
        if rho is None and "rho" not in self.errors:
            cleaned_data["rho"] = rho = settings.PPHI_DEFAULT_RHO
        if rho is not None and not 0.0 < rho < 1.0:
            self.add_error("rho", "The grid ratio must lie in (0, 1).")

        t_max, t_min = cleaned_data.get("tmax"), cleaned_data.get("tmin")
        if t_max is not None and t_min is not None and t_min >= t_max:
            self.add_error("tmin", "tmin must be smaller than tmax.")
        return cleaned_data


class SamplerSettingsForm(SectionForm):
    method = forms.ChoiceField(choices=[(m, m) for m in METHODS], initial="polchinski")
    replicas = forms.IntegerField(min_value=1, initial=100)
    mc_inner = forms.IntegerField(min_value=2, initial=64)
    common_random_numbers = forms.BooleanField(required=False, initial=False)
    chains = forms.IntegerField(min_value=1, initial=4)
    step = forms.FloatField(initial=0.5)
    burn_in = forms.IntegerField(min_value=0, initial=1000)
    thin = forms.IntegerField(min_value=1, initial=1)
    n_samples = forms.IntegerField(min_value=1, initial=1000)
    adapt = forms.BooleanField(required=False, initial=True)
    preconditioned = forms.BooleanField(required=False, initial=True)

    def clean(self) -> Dict[str, Any]:
        cleaned_data = super().clean()
        step = cleaned_data.get("step")
        if step is not None and not (math.isfinite(step) and step > 0):
            self.add_error("step", "The MALA step must be positive.")
        return cleaned_data


class AnalysisSettingsForm(SectionForm):
    alphas = FloatListField(required=False, initial=[0.0, 0.5, 1.0])
    moment_exponents = FloatListField(required=False, initial=[2.0])
    extremes = forms.BooleanField(required=False, initial=False)
    dump_fields = forms.BooleanField(required=False, initial=False)
    dump_paths = forms.BooleanField(required=False, initial=False)
    variational = forms.ChoiceField(choices=[(m, m) for m in VARIATIONAL_MODES], initial="both")
    sgd_steps = forms.IntegerField(min_value=1, initial=200)
    sgd_rate = forms.FloatField(initial=0.5)
    sgd_batch = forms.IntegerField(min_value=2, initial=64)
    reference_batch = forms.IntegerField(min_value=2, initial=4096)

    def clean(self) -> Dict[str, Any]:
        cleaned_data = super().clean()
        exponents = cleaned_data.get("moment_exponents")
        if exponents is not None and any(r <= 0 for r in exponents):
            self.add_error("moment_exponents", "Moment exponents must be positive.")
        rate = cleaned_data.get("sgd_rate")
        if rate is not None and not 0.0 < rate <= 1.0:
            self.add_error("sgd_rate", "The SGD rate must lie in (0, 1].")
        return cleaned_data


class RunSettingsForm(SectionForm):
    """The top-level keys; the nested tables are validated by their own forms."""

    pipeline = forms.ChoiceField(choices=[(p, p) for p in PIPELINES], initial="sample")
    seed = forms.IntegerField(min_value=0, max_value=2**64 - 1, initial=0)
    out_dir = forms.CharField()
    workers = forms.IntegerField(min_value=1, required=False)
    model = forms.Field()
    grid = forms.Field(required=False)
    sampler = forms.Field(required=False)
    analysis = forms.Field(required=False)

    def clean(self) -> Dict[str, Any]:
        cleaned_data = super().clean()
        for table in ("model", "grid", "sampler", "analysis"):
            value = cleaned_data.get(table)
            if value is not None and not isinstance(value, dict):
                self.add_error(table, f"{table} must be a table of keys.")
        return cleaned_data
