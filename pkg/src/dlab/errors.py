"""Exception hierarchy shared across the package."""


class DlabError(Exception):
    """Base class for all dlab errors."""


class NonPrime(DlabError):
    pass


class UnsupportedRealDim(DlabError):
    pass


class ReduciblePoly(DlabError):
    pass


class DivisionByNegligible(DlabError):
    pass


class ScaleOutOfRange(DlabError):
    pass


class AlgebraMismatch(DlabError):
    pass


class ScaleMismatch(DlabError):
    pass


class BudgetExceeded(DlabError):
    """Raised when an operation would exceed the configured point budget.

    Carries a partial-size report in ``sizes``.
    """

    def __init__(self, message, sizes=None):
        super().__init__(message)
        self.sizes = dict(sizes or {})


class NoAdmissiblePairs(DlabError):
    pass


class SingularMap(DlabError):
    pass


class SubAlgebraTrapped(DlabError):
    """Escape-basis search stalled inside a proper subspace."""

    def __init__(self, message, span=None):
        super().__init__(message)
        self.span = list(span or [])


class NotRealBase(DlabError):
    pass


class EmptyInput(DlabError):
    pass


class EmptyGraph(DlabError):
    pass


class ParameterRangeError(DlabError):
    pass


class GenerationFailed(DlabError):
    pass


class TrappedInput(DlabError):
    pass
