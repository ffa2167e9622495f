"""Exception hierarchy shared across the package.

Every error raised deliberately by this package derives from SbpError, so
callers (and the CLI) can distinguish our rejections from genuine bugs.
"""


class SbpError(Exception):
    """Base class for all package errors."""


class DomainError(SbpError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ConfigError(SbpError, ValueError):
    """An experiment or CLI configuration is inconsistent or incomplete."""


class BudgetError(SbpError):
    """A requested computation exceeds the enumeration or memory budget."""


class AccuracyError(SbpError):
    """A numeric surrogate could not reach its certified error bound."""


class MissingDataError(SbpError):
    """A statistic was requested at a point where no data was recorded."""
