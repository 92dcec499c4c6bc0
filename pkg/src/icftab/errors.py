"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigurationError -> 2, DataError
(and subclasses) -> 3.
"""


class IcfTabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(IcfTabError):
    """Invalid configuration: bad fractions, impossible architectures,
    mismatched test/task combinations, and similar user-fixable issues."""


class DataError(IcfTabError):
    """Problem with the data itself (missing cells, bad targets)."""


class SchemaError(DataError):
    """CSV columns do not match the schema sidecar."""


class ParseError(DataError):
    """A cell could not be parsed as a number; carries row/column location."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class NumericalError(IcfTabError):
    """An iterative numerical routine failed to converge."""
