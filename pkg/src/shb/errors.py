"""Exception hierarchy shared by every module."""


class ShbError(Exception):
    pass


class NonFiniteInput(ShbError, ValueError):
    pass


class NegativeDerivative(ShbError, ValueError):
    pass


class StepUnderflowAtStart(ShbError, RuntimeError):
    pass


class NoSignChange(ShbError, ValueError):
    pass


class TrivialSolution(ShbError, ValueError):
    pass


class NoCompleteRung(ShbError, ValueError):
    pass


class DegenerateCriticalPoint(ShbError, RuntimeError):
    pass


class InsufficientRungs(ShbError, ValueError):
    pass


class NoContraction(ShbError, ValueError):
    pass


class NoFirstCriticalPoint(ShbError, RuntimeError):
    """Escape happened before w' first vanished; ``escape_s`` holds the abscissa."""

    def __init__(self, message, escape_s=None):
        super().__init__(message)
        self.escape_s = escape_s


class BracketingFailed(ShbError, RuntimeError):
    pass


class ValidationFailed(ShbError, RuntimeError):
    pass


class DegenerateRoots(ShbError, ValueError):
    pass


class SymmetryViolation(ShbError, ValueError):
    pass


class OutOfDomain(ShbError, ValueError):
    pass
