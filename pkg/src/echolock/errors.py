"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2,
NumericalStabilityError -> 3.
"""


class EchoLockError(Exception):
    """Base class for all package errors."""


class ConfigError(EchoLockError):
    """Invalid configuration: bad values, unknown keys, missing roles."""


class ShapeError(EchoLockError):
    """Mismatched array shapes or sample grids."""


class NumericalStabilityError(EchoLockError):
    """A density-matrix invariant was violated during integration."""

    def __init__(self, message: str, t_us: float):
        super().__init__(f"{message} at t = {t_us:.6g} us")
        self.t_us = t_us


class DetectionError(EchoLockError):
    """Echo events could not be matched to data pulses."""
