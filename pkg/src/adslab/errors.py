"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so library code should raise
the most specific class that applies.
"""


class AdslabError(Exception):
    """Base class for all package errors."""


class ValidationError(AdslabError):
    """Invalid input or configuration (CLI exit code 2)."""


class NumericalError(AdslabError):
    """A numerical routine failed to converge or produced garbage (exit 3)."""


class BudgetError(AdslabError):
    """A configured resource budget was exceeded (exit 4)."""
