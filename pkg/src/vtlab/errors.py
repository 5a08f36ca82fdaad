"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class VtlabError(Exception):
    """Base class for all vtlab errors."""


class UsageError(VtlabError):
    """Bad arguments or configuration supplied by the caller."""


class DataError(VtlabError):
    """Invalid, corrupted, or missing data."""


class NumericalError(VtlabError):
    """Training or inference produced non-finite values."""
