"""Error types shared across the package.

Exit-code mapping used by the CLI:
  1 -> usage errors (bad flags, unknown command)
  2 -> DataError (bad or inconsistent input data)
  3 -> InternalError (a library invariant was violated)
"""


class BbtError(Exception):
    """Base class for all package errors."""


class DataError(BbtError):
    """Invalid, inconsistent, or missing input data."""


class InternalError(BbtError):
    """An internal invariant was violated; indicates a bug."""
