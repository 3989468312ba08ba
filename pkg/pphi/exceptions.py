class PPhiError(Exception):
    """Base class of every error raised by the toolkit."""


class ConfigurationError(PPhiError):
    """Invalid input or configuration. Management commands exit with status 2."""


class NumericalError(PPhiError):
    """A numerical procedure had to abort. Management commands exit with status 3."""
