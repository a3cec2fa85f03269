"""Exception hierarchy shared by all modules."""


class ParabinvError(Exception):
    """Base class for every error raised by this package."""


class InputError(ParabinvError, ValueError):
    """Malformed input: bad grid, wrong sizes, empty collections."""


class DomainError(ParabinvError, ValueError):
    """Input is well-formed but outside the domain of the operation."""


class ConfigurationError(ParabinvError, ValueError):
    """Incompatible discretisation choices (e.g. aliasing frequency grids)."""


class AdmissibilityError(DomainError):
    """Coefficients violate the sign conditions or the shift is too small."""


class DegeneracyError(ParabinvError, ArithmeticError):
    """A denominator vanished to working precision."""


class NumericalError(ParabinvError, ArithmeticError):
    """A numerical scheme became unstable."""


class UnsupportedConfigurationError(ParabinvError, NotImplementedError):
    """The requested combination of options has no implementation."""
