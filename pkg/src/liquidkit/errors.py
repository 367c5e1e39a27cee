"""Exception types raised across liquidkit."""


class LiquidKitError(Exception):
    """Base class for all library errors."""


class NotAUnit(LiquidKitError, ArithmeticError):
    pass


class BudgetExceeded(LiquidKitError):
    """An enumeration or matrix would exceed the configured size cap."""


class DomainError(LiquidKitError, ValueError):
    pass


class PrecisionExhausted(LiquidKitError):
    """More p-adic digits were requested than the working precision allows."""


class LengthMismatch(LiquidKitError, ValueError):
    pass


class IncompleteDigitSet(LiquidKitError):
    """No digit in the supplied set satisfies the same-sign split."""


class GridMismatch(LiquidKitError):
    """A required level k*c is missing from an admissible system's grid."""


class SolverFailure(LiquidKitError):
    """A user-supplied preimage oracle violated its contract."""


class HypothesisFailure(LiquidKitError):
    """An instance does not satisfy the hypotheses of the checked statement."""


class TailBudget(LiquidKitError):
    pass


class UnknownSuite(LiquidKitError, KeyError):
    pass


class IoError(LiquidKitError, OSError):
    """A report could not be written or read."""
