"""Exception hierarchy shared by the library and the command-line front end.

Each class carries the process exit status the CLI reports for it.
"""


class BglsffError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InvalidArgumentError(BglsffError, ValueError):
    """A parameter or input violates a documented precondition."""

    exit_code = 2


class NumericError(BglsffError, ArithmeticError):
    """Overflow, solver failure or an ill-defined numerical quantity."""

    exit_code = 3


class DegenerateFilterError(NumericError):
    """The filter (or BGL normalisation) removed all spectral weight."""


class IntegrationError(NumericError):
    """The fixed-step integrator became unstable."""


class NotSaturatedError(NumericError):
    """A curve never settles into the plateau band."""


class ResourceError(BglsffError, MemoryError):
    """The requested job exceeds the configured size limits."""

    exit_code = 4
