"""Exception types shared by the numerical modules."""


class HylError(Exception):
    """Base class for all package errors."""


class DomainError(HylError, ValueError):
    """An argument lies outside the domain of the operation."""


class DivergenceError(DomainError):
    """The requested series or integral diverges."""


class ConvergenceError(HylError, ArithmeticError):
    """A series or root solve did not reach its tolerance within the cap."""


class NoSolutionError(DomainError):
    """The defining equation has no solution for these parameters."""


class AmbiguityError(HylError):
    """The quantity is undefined at a transition point (two rate-function zeroes)."""


class StateSpaceError(HylError):
    """Exact enumeration would exceed the configured state budget."""


class TailMassError(HylError):
    """The cycle-length truncation neglects more mass than allowed."""


class InsufficientSamplesError(HylError):
    """Too few samples to form the required number of batches."""


class CutoffError(DomainError):
    """A cycle-length cutoff is incompatible with the truncation."""
