"""Exception types raised by the solvers."""


class UscError(Exception):
    """Base class for numerical failures inside the toolkit."""


class DimensionGuard(UscError, ValueError):
    pass


class CutoffTooSmall(UscError):
    pass


class DegenerateGroundSpace(UscError):
    pass


class BasisMismatch(UscError, ValueError):
    pass


class RootBracketingFailure(UscError):
    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class NotDegenerate(UscError):
    pass


class ConditionViolated(UscError, ValueError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class TailMassTooLarge(CutoffTooSmall):
    pass


class StepCountTooLow(UscError):
    pass


class ZeroProjection(UscError):
    pass


class SearchBudgetExceeded(UscError):
    pass


class VerificationFailure(UscError):
    """A constructed object failed an end-to-end check (e.g. wrong code group)."""


class TransversalCouplingPresent(UscError, ValueError):
    pass
