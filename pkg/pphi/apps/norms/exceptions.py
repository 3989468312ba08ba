from ...exceptions import ConfigurationError


class BlockIndexError(ConfigurationError):
    """A Littlewood-Paley block index is outside −1..j_ε."""


class NormParameterError(ConfigurationError):
    """An exponent or regularity parameter of a norm is out of range."""
