"""Exception types shared across the package.

ValidationError covers bad inputs and bad configuration; the CLI maps it
to exit code 1. Anything else that escapes is a runtime failure (exit 2).
"""


class FedprovError(Exception):
    """Base class for package errors."""


class ValidationError(FedprovError):
    """Invalid input data, arguments, or configuration."""


class UndefinedMetricError(FedprovError):
    """A metric is undefined for the given inputs (e.g. AUC on one class)."""
