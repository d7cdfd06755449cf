"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError (and LinAlgError) -> 3.
"""


class SubclustError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SubclustError):
    """Invalid configuration: bad parameter values, unknown config keys."""


class DataError(SubclustError):
    """Malformed or inconsistent data: bad files, dimension mismatches."""


class NumericalError(SubclustError):
    """A numerical routine failed (eigendecomposition, SVD, linear solve)."""
