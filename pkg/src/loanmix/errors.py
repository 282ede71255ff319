"""Exception hierarchy shared by every loanmix module."""


class LoanMixError(Exception):
    """Base class for all errors raised by loanmix."""


class ValidationError(LoanMixError, ValueError):
    """Scenario parameters violate a structural invariant.

    ``field`` names the offending scenario key (``"noise.sigma"``) when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DomainError(LoanMixError, ValueError):
    """Consumption falls outside the domain of the utility function."""


class SaturationError(DomainError):
    """Quadratic utility evaluated at or beyond its bliss point alpha/beta."""


class AssumptionViolation(LoanMixError):
    """A modelling assumption needed by a closed form does not hold."""


class ConsistencyError(LoanMixError, RuntimeError):
    """An internal numerical consistency check failed."""


class DegeneratePoolError(LoanMixError):
    """The income-contingent pool has no participants."""


class ConvergenceError(LoanMixError, RuntimeError):
    """Fixed-point iteration did not converge.

    The iteration trace is attached as ``trace`` for post-mortem inspection.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)
