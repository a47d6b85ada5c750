"""Exception types raised by the solvers and the configuration layer."""


class LogitMFGError(Exception):
    """Base class for all package errors."""


class DomainError(LogitMFGError, ValueError):
    pass


class UndefinedDeformedExp(LogitMFGError, ArithmeticError):
    """exp_q hit its +inf branch (q > 1 and 1 + (1-q) z <= 0)."""


class InvalidGrid(LogitMFGError, ValueError):
    pass


class InvalidPopulation(LogitMFGError, ValueError):
    pass


class NegativeDensity(LogitMFGError, ValueError):
    pass


class ShapeMismatch(LogitMFGError, ValueError):
    pass


class IncompatibleResolution(LogitMFGError, ValueError):
    pass


class EvaluationError(LogitMFGError):
    pass


class UtilityBoundExceeded(EvaluationError):
    pass


class UnsupportedModel(LogitMFGError):
    pass


class CflViolation(LogitMFGError):
    pass


class CflWarning(UserWarning):
    pass


class NonnegativityLost(LogitMFGError, ArithmeticError):
    pass


class MassConservationLost(LogitMFGError, ArithmeticError):
    pass


class ValueBoundViolated(LogitMFGError, ArithmeticError):
    pass


class NonFiniteValue(LogitMFGError, ArithmeticError):
    pass


class NotConverged(LogitMFGError):
    """Iteration budget exhausted.

    ``residual`` is the last measured residual; ``log`` is the solver's
    iteration log when one exists, ``result`` the partially converged
    solution.
    """

    def __init__(self, message, residual=float("nan"), log=None, result=None):
        super().__init__(message)
        self.residual = residual
        self.log = log
        self.result = result


class ParseError(LogitMFGError, ValueError):
    def __init__(self, key, reason, line=None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{key}{where}: {reason}")
        self.key = key
        self.reason = reason
        self.line = line


class ValidationError(ParseError):
    pass
