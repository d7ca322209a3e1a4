"""Exception hierarchy shared by every module."""


class RegmodError(Exception):
    """Base class for all errors raised by regmod."""


class UsageError(RegmodError, ValueError):
    """Bad call: wrong dimensions, points outside the domain, bad parameters."""


class ConfigError(RegmodError, ValueError):
    """Instance or suite configuration does not match the schema.

    ``path`` names the offending field, e.g. ``"kappa0"`` or ``"runs[2].seed"``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class CapabilityError(RegmodError):
    """The requested operation has no exact kernel for this instance family."""


class NoExactFormula(RegmodError):
    """No exact subdifferential formula at this point.

    Callers must not read this as a zero distance.
    """


class InsufficientData(RegmodError):
    """Too few usable samples for an estimate."""


class DomainError(RegmodError, ValueError):
    """Query against an empty set (e.g. distance to an empty critical set)."""
