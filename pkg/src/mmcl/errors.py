"""Exception hierarchy shared across the package.

Two families matter for the command line interface: configuration errors
(bad arguments, malformed config files, out-of-range parameters) map to
exit code 2, numerical failures (degenerate inputs, non-finite values,
division by zero) map to exit code 3.
"""


class MmclError(Exception):
    """Base class for all package errors."""


class ConfigurationError(MmclError):
    """Base class for errors caused by bad arguments or config files."""


class InvalidInput(ConfigurationError, ValueError):
    """An argument has the wrong shape, type, or value."""


class InvalidRank(ConfigurationError, ValueError):
    """A requested rank is not representable for the given matrix."""


class InvalidProbability(ConfigurationError, ValueError):
    """A probability parameter lies outside [0, 1]."""


class InvalidK(ConfigurationError, ValueError):
    """A cluster count is incompatible with the graph dimensions."""


class NumericalError(MmclError):
    """Base class for failures detected during numerical work."""


class DegenerateData(NumericalError, ValueError):
    """Input data carries no usable signal (e.g. identical samples)."""


class NonFinite(NumericalError, ArithmeticError):
    """A computation produced NaN or infinity."""


class DivideByZero(NumericalError, ZeroDivisionError):
    """A quantity that must be positive was exactly zero."""


CONFIG_EXIT_CODE = 2
NUMERICAL_EXIT_CODE = 3
