"""Exact and certified computations around liquid real vector spaces."""

__version__ = "0.1.0"

from .errors import (BudgetExceeded, DomainError, GridMismatch, HypothesisFailure, IncompleteDigitSet, IoError,
                     LengthMismatch, LiquidKitError, NotAUnit, PrecisionExhausted, SolverFailure, TailBudget,
                     UnknownSuite)
from .laurent import Laurent, enumerate_ball, invert_unit, parse_text, to_text, weighted_norm
from .theta import construct_generator, theta_eval

__all__ = [
    "__version__", "Laurent", "enumerate_ball", "invert_unit", "parse_text", "to_text", "weighted_norm",
    "construct_generator", "theta_eval", "BudgetExceeded", "DomainError", "GridMismatch", "HypothesisFailure",
    "IncompleteDigitSet", "IoError", "LengthMismatch", "LiquidKitError", "NotAUnit", "PrecisionExhausted",
    "SolverFailure", "TailBudget", "UnknownSuite",
]
