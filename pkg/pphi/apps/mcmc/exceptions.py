from ...exceptions import ConfigurationError, NumericalError


class McmcConfigError(ConfigurationError):
    """Sampler parameters are out of range."""


class ZeroAcceptanceError(NumericalError):
    """Almost no proposals were accepted, so the step size is far too large."""

    def __init__(self, rate: float, step: float):
        super().__init__(f"acceptance rate {rate:.3%} below 1% with step {step:.3g}")
        self.rate = rate
        self.step = step
