"""Exception hierarchy shared by all ppskit modules."""


class PpskitError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(PpskitError):
    """An argument violates a documented precondition or invariant."""


class UndefinedCharacteristicError(PpskitError):
    """A source characteristic is undefined for the given distribution.

    Raised instead of returning NaN so that sweep statistics cannot be
    silently corrupted by propagating sentinels.
    """


class ConfigError(PpskitError):
    """A run configuration file is malformed or contains unknown keys."""


class DataModelMismatchError(PpskitError):
    """Count data and the detection model disagree (shape, settings, totals)."""
