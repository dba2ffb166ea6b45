"""Exception types."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class KnotLimitError(DomainError):
    """A path would exceed the configured knot cap."""


class PreconditionError(ValueError):
    """A documented precondition of a check does not hold."""


class ConfigurationError(ValueError):
    """Unknown identity name, mismatched fixture lengths, off-grid times..."""
