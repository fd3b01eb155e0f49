"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: InputError (and its ConfigError
subclass) exit with 2, NumericError with 3.
"""


class GraphFillError(Exception):
    """Base class for all errors raised by this package."""


class InputError(GraphFillError, ValueError):
    """Invalid user-supplied data: bad edge lists, malformed files, bad labels."""


class ConfigError(InputError):
    """Invalid hyperparameter combination."""


class NumericError(GraphFillError, ArithmeticError):
    """Non-finite values or other numeric failure during computation."""
