"""STL fragment: formulas, concrete syntax, monitoring."""
from .formula import (Always, And, BallReach, Clearance, DegenerateGradientWarning,
                      Eventually, Formula, FragmentError, Halfspace, Interval, Not,
                      Pred, Predicate, TrueF, Until, conjuncts, eval_predicate,
                      horizon, is_state_formula, literals, predicate_gradient,
                      predicate_time_derivative)
from .monitor import Signal, SignalTooShort, eval_boolean, eval_robustness
from .parser import STLSyntaxError, format_formula, format_predicate, parse_formula

__all__ = [
    "Always", "And", "BallReach", "Clearance", "DegenerateGradientWarning",
    "Eventually", "Formula", "FragmentError", "Halfspace", "Interval", "Not",
    "Pred", "Predicate", "TrueF", "Until", "conjuncts", "eval_predicate",
    "horizon", "is_state_formula", "literals", "predicate_gradient",
    "predicate_time_derivative", "Signal", "SignalTooShort", "eval_boolean",
    "eval_robustness", "STLSyntaxError", "format_formula", "format_predicate",
    "parse_formula",
]
