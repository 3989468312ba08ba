from ...exceptions import ConfigurationError


class PolynomialError(ConfigurationError):
    """The interaction polynomial, its Wick variance or its cut-off is invalid."""
