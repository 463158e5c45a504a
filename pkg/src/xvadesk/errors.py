"""Exception hierarchy shared across the engine.

Config problems are reported as :class:`ConfigError` (CLI exit code 2);
everything that goes wrong *during* a numerical run maps to a subclass of
:class:`NumericalError` (CLI exit code 3).
"""


class XvaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(XvaError):
    """Invalid or incomplete run configuration."""


class NumericalError(XvaError):
    """A numerical procedure failed (non-finite values, divergence, ...)."""


class StrategyUnsolvableError(NumericalError):
    """The requested hedge strategy has no solution (e.g. R_1 == R_2)."""


class FixedPointError(NumericalError):
    """The implicit funding-cost fixed point did not converge.

    Carries the per-iteration max-abs-change trace for diagnostics.
    """

    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


class GridError(NumericalError):
    """The finite-difference grid is unusable (too coarse, bad bounds)."""
