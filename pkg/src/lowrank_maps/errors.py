"""Exception hierarchy.

The CLI maps each family onto an exit code: input problems (2), shape
problems (3) and numerical failures (4).
"""


class LowRankError(Exception):
    """Base class for every error raised by this package."""


class InputError(LowRankError, ValueError):
    """Malformed input: unparsable files, bad configs, non-finite entries."""


class ParseError(InputError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)


class RaggedRows(ParseError):
    pass


class TooFewSnapshots(InputError):
    pass


class DimensionMismatch(LowRankError, ValueError):
    pass


class NumericalError(LowRankError, ArithmeticError):
    """A factorization or discretization could not produce a trustworthy result."""


class NonConvergence(NumericalError):
    pass


class NotPsd(NumericalError):
    pass


class NotSymmetric(NumericalError):
    pass


class KernelEvalFailure(NumericalError):
    pass


class NotConverged(NumericalError):
    """Grid refinement hit its node budget; the trace so far is attached."""

    def __init__(self, message, trace=None, solution=None):
        super().__init__(message)
        self.trace = list(trace or [])
        self.solution = solution


class SingularSubproblemWarning(UserWarning):
    """An ALS half-step hit rank-deficient normal equations (pseudoinverse used)."""
