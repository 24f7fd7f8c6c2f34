"""Exception types raised by the simulator."""


class QKDSimError(Exception):
    """Base class for simulator errors."""


class RejectedInput(QKDSimError, ValueError):
    """An argument violates an operation's precondition."""


class UndefinedVisibility(QKDSimError, ValueError):
    """Visibility requested for counts whose max + min is zero."""


class UndefinedErrorRate(QKDSimError, ZeroDivisionError):
    """Error rate requested for an intensity with zero gain."""


class CorrectionFailure(QKDSimError):
    """Cascade could not reconcile a block; the block must be discarded."""


class ConfigError(QKDSimError, ValueError):
    """A scenario configuration failed validation."""
