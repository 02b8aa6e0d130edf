"""Exception types shared across the package."""


class TraceshiftError(Exception):
    """Base class for all package-specific errors."""


class StructureError(TraceshiftError):
    """Operands do not conform to the owning algebra (shape or block mismatch)."""


class DomainError(TraceshiftError, ValueError):
    """A parameter lies outside the mathematically admissible range."""


class SingularityError(DomainError):
    """Evaluation requested at, or too close to, the spectrum."""


class CapabilityError(TraceshiftError):
    """The object cannot support the requested operation (derivative depth,
    missing class witness, enumeration cap, or absent decay information)."""


class DecompositionError(TraceshiftError):
    """Spectral decomposition failed to reach the required residual."""


class ReconstructionError(TraceshiftError):
    """Least-squares reconstruction is rank deficient beyond the expected
    polynomial ambiguity.  Carries a conditioning report in ``details``."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


class ConfigError(TraceshiftError):
    """Experiment configuration failed schema validation."""


class FixtureError(TraceshiftError):
    """A named fixture could not be generated."""


class SeriesLookupError(TraceshiftError, LookupError):
    """A requested report series is absent."""
