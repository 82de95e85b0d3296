"""
Error types shared by the counting engines and the command-line front end.
"""


class WorkbenchError(Exception):
    """Base class for every error raised by the workbench."""


class DomainError(WorkbenchError, ValueError):
    """An input lies outside the domain of an operation (excluded lambda, composite p, ...)."""


class DataError(WorkbenchError):
    """A bundled or user-supplied document is malformed or missing."""


class MissingDataError(DataError):
    """A data file is absent; claims that need it are reported as skipped."""


class IntegrityError(WorkbenchError):
    """A result contradicts a cached value or an internal consistency check."""


class UnsupportedError(WorkbenchError):
    """The requested (variety, method) combination has no implementation."""
