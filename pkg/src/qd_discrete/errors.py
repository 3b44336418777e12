"""Exception types shared across the package."""


class QdError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(QdError, ValueError):
    """Invalid configuration: bad value, unknown key, or unusable setup."""


class GenotypeError(QdError, ValueError):
    """Genotype, index, or array shape inconsistent with the problem dimensions."""


class EmptyArchiveError(QdError, RuntimeError):
    """The operation needs at least one occupied cell in the archive."""


class SolverError(QdError, RuntimeError):
    """The temperature solver could not reach the target entropy."""


class NumericError(QdError, ArithmeticError):
    """A non-finite value appeared where a finite one is required."""
