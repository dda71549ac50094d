"""Exception types raised across the package."""


class ZonalSimError(Exception):
    """Base class for all package errors."""


class InvalidProfile(ZonalSimError):
    pass


class PoleNode(ZonalSimError):
    pass


class GridMismatch(ZonalSimError):
    pass


class GaugeViolation(ZonalSimError):
    pass


class BadOrder(ZonalSimError):
    pass


class DegenerateInput(ZonalSimError):
    pass


class NotZonal(ZonalSimError):
    pass


class TooLarge(ZonalSimError):
    pass


class InsufficientData(ZonalSimError):
    pass


class ConfigError(ZonalSimError):
    """Raised with every violation found, not just the first."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class BlowupDetected(ZonalSimError):
    def __init__(self, time, message="blow-up detected"):
        self.time = time
        super().__init__(f"{message} at t={time:.6g}")


class NonConvergentAverage(UserWarning):
    """Window residual of a finite-window average did not decrease."""
