"""Exception types shared across the package.

The CLI maps ``ValidationError`` to exit code 2 (bad input / usage) and
``NumericalError`` to exit code 3 (internal numerical failure).
"""


class ValidationError(ValueError):
    """Input violates a documented precondition or format."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its accuracy target."""
