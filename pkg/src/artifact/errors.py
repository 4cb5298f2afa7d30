"""Exception types shared across the package.

Each maps onto one CLI exit code (see ``artifact.cli``).
"""


class ArtifactError(Exception):
    """Base class for all package errors."""


class DomainError(ArtifactError, ValueError):
    """Input outside the mathematical domain of an operation."""


class SizeLimitError(ArtifactError):
    """A combinatorial enumeration would exceed its documented cap."""


class PreconditionError(ArtifactError, ValueError):
    """Hypotheses of a closed-form bound do not hold."""


class SingularityError(ArtifactError, ZeroDivisionError):
    """A closed form hits a vanishing denominator."""


class ConfigError(ArtifactError, ValueError):
    """Bad configuration file or flag."""
