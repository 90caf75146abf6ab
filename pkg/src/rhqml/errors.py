"""Exception taxonomy shared across the package."""


class ConfigurationError(Exception):
    """A spec, dimension, or config value is inconsistent or out of range."""


class DataError(Exception):
    """Input data is malformed (bad CSV row, NaN feature, label out of range)."""


class UsageError(Exception):
    """An API was called with mismatched or stale arguments."""


class AttackError(Exception):
    """An attack target is degenerate (e.g. zero observed gradient)."""
