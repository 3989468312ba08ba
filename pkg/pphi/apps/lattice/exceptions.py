from ...exceptions import ConfigurationError, NumericalError


class GeometryError(ConfigurationError):
    """The lattice geometry (or a field's shape) is invalid."""


class DualIndexError(ConfigurationError):
    """A frequency does not belong to the dual set of the lattice."""


class IncompatibleGridError(ConfigurationError):
    """Two lattices cannot be related by trigonometric embedding or restriction."""


class FieldFormatError(ConfigurationError):
    """A binary field file is malformed."""


class SymmetryError(NumericalError):
    """Fourier coefficients are not Hermitian-symmetric within tolerance."""
