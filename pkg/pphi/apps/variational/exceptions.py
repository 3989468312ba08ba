from ...exceptions import ConfigurationError, NumericalError


class DriftGridError(ConfigurationError):
    """A drift does not match its scale grid, or a time range is invalid for it."""


class OptimizerConfigError(ConfigurationError):
    """Stochastic-gradient parameters are out of range."""


class DivergenceError(NumericalError):
    """The optimised objective blew up."""

    def __init__(self, step: int, value: float, initial: float):
        super().__init__(f"objective {value:.6g} at step {step} diverged from initial {initial:.6g}")
        self.step = step
        self.value = value
        self.initial = initial
