from ...exceptions import ConfigurationError, NumericalError


class FlowConfigError(ConfigurationError):
    """A flow configuration is inconsistent (sample count, grid or cut-off)."""


class EmptySampleError(ConfigurationError):
    """A diagnostic was asked to summarise an empty set of coupling samples."""


class DegenerateWeightsError(NumericalError):
    """
    The importance weights of the gradient estimator collapsed.

    Raised when the effective sample size drops below 2, which means the
    cut-off E or the inner sample count M is badly chosen for the scale.
    """

    def __init__(self, ess: float, t: float):
        super().__init__(f"effective sample size {ess:.3g} < 2 at scale t={t:.6g}")
        self.ess = ess
        self.t = t


class NonFiniteFieldError(NumericalError):
    """The integrated field stopped being finite."""

    def __init__(self, scale_index: int, t: float):
        super().__init__(f"non-finite field after scale step {scale_index} (t={t:.6g})")
        self.scale_index = scale_index
        self.t = t
