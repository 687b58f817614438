"""Exception hierarchy.

Two families matter to callers: precondition violations (bad inputs, CLI exit
code 2) and numerical failures (a solver gave up, CLI exit code 3).
"""


class BasinlabError(Exception):
    pass


class PreconditionError(BasinlabError):
    """Input violates a documented precondition."""


class NumericalError(BasinlabError):
    """A numerical procedure failed to converge or certify."""


# poly
class DegreeTooSmall(PreconditionError):
    pass


class NotCentered(PreconditionError):
    pass


class DegenerateLeadingCoefficient(PreconditionError):
    pass


# escape
class NotInBasin(PreconditionError):
    pass


# rays
class BelowCriticalHeight(PreconditionError):
    pass


class OnSingularLeafAmbiguous(NumericalError):
    """The queried point is too close to a zero of omega; several external
    angles meet there.  The candidate angles are attached."""

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = tuple(candidates)


class NewtonDivergence(NumericalError):
    pass


class StepLimit(NumericalError):
    pass


# levels
class NonGenericHeight(PreconditionError):
    pass


class SeedMiss(NumericalError):
    pass


class ContainsSingularity(PreconditionError):
    pass


# local models
class InconsistentDegrees(NumericalError):
    pass


class LiftFailure(NumericalError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


# deform
class NotInShiftLocus(PreconditionError):
    pass


class DegreeMismatch(PreconditionError):
    pass


class SolveFailure(NumericalError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
