"""Exception hierarchy shared by all solver components."""


class PenroseFifeError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PenroseFifeError, ValueError):
    pass


class MeshError(PenroseFifeError, ValueError):
    pass


class ShapeError(PenroseFifeError, ValueError):
    pass


class KernelError(PenroseFifeError, ValueError):
    pass


class DataError(PenroseFifeError, ValueError):
    pass


class RangeError(PenroseFifeError, ValueError):
    pass


class GridError(PenroseFifeError, ValueError):
    pass


class DegenerateFit(PenroseFifeError, ValueError):
    pass


class SolverError(PenroseFifeError, RuntimeError):
    """Base class for failures of a numerical solve."""


class NegativityLoss(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class SolveError(SolverError):
    pass


class BracketFailure(SolverError):
    pass


class StepTooLarge(SolverError):
    pass


class TrajectoryError(SolverError):
    """A time step failed inside :func:`penrose_fife.stepper.run`.

    ``step`` is the index ``n`` of the failing transition ``n -> n+1`` and
    ``cause`` the underlying solver error.
    """

    def __init__(self, step, cause):
        super().__init__(f"step {step} -> {step + 1} failed: {type(cause).__name__}: {cause}")
        self.step = step
        self.cause = cause


class ParseError(PenroseFifeError, ValueError):
    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class UnknownKey(ParseError):
    pass
