"""Exception hierarchy.

Two families matter to callers: configuration problems (bad kernel text,
mismatched dimensions, malformed data) and numerical failures (Cholesky
breakdown, optimizer exhaustion).  The CLI maps them to exit codes 2 and 3.
"""


class ConfigError(ValueError):
    """Invalid user-supplied input."""


class KernelSyntaxError(ConfigError):
    """Kernel expression text could not be parsed.

    Attributes
    ----------
    offset : int
        Byte offset into the source text where parsing failed.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class LayoutError(ConfigError):
    """Parameter vector does not match the kernel expression."""


class DimensionError(ConfigError):
    """Operation not available for this number of hyperparameters."""


class DataError(ConfigError):
    """Malformed or degenerate dataset."""


class NumericalError(ArithmeticError):
    """A numerical routine failed."""


class NotPositiveDefiniteError(NumericalError):
    """Covariance matrix stayed indefinite after jitter escalation."""


class OptimizationError(NumericalError):
    """Every optimizer restart failed to reach a finite objective."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class GenerationError(NumericalError):
    """Dataset sampling failed."""
