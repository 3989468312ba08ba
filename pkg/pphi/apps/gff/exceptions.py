from ...exceptions import ConfigurationError


class ScaleGridError(ConfigurationError):
    """A scale grid is not of the form ∞ > t_1 > … > t_K = 0."""


class GridTimeError(ConfigurationError):
    """A requested time is not a point of the scale grid."""
