from ...exceptions import ConfigurationError


class DomainError(ConfigurationError):
    """The lattice spacing is outside the range where the centring is defined."""

    def __init__(self, epsilon: float, bound: str):
        super().__init__(f"epsilon={epsilon!r} must be below {bound}")
        self.epsilon = epsilon


class DegenerateSampleError(ConfigurationError):
    """Too few samples, or samples without spread, to fit a distribution."""


class MaximaFormatError(ConfigurationError):
    """A file of maxima could not be parsed."""
