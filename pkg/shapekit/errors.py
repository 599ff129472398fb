"""Exceptions raised by shapekit.

Each class carries the process exit code the command line maps it to.
"""

from .const import EXIT_INPUT, EXIT_SOLVER, EXIT_DEGENERATE


class ShapekitError(Exception):
    """Base class for all shapekit errors"""

    exit_code = EXIT_SOLVER


class InputError(ShapekitError, ValueError):
    """Invalid data, configuration or arguments"""

    exit_code = EXIT_INPUT


class SolverError(ShapekitError, ArithmeticError):
    """A factorization or iterative solve could not be completed"""

    exit_code = EXIT_SOLVER


class NotPsdError(SolverError):
    """A matrix expected to be positive semidefinite is not, even after jitter"""


class DegenerateInferenceError(ShapekitError, ArithmeticError):
    """The plug-in covariance collapsed beyond jitter repair"""

    exit_code = EXIT_DEGENERATE
