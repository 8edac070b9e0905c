"""Error hierarchy shared by every app.

Each family carries the exit code the management commands report.
"""


class FrflowError(Exception):
    exit_code = 1

    def __init__(self, message="", **context):
        super().__init__(message)
        self.context = context


# ==========================
# PARSE (exit 2)
# ==========================
class InstanceParseError(FrflowError):
    exit_code = 2

    def __init__(self, message, line=None, column=None):
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(f"{where}{message}", line=line, column=column)
        self.line = line
        self.column = column


# ==========================
# NUMERICAL (exit 3)
# ==========================
class NumericalError(FrflowError):
    exit_code = 3


class NonConvergence(NumericalError):
    pass


class NumericalBlowup(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class SingularBase(NumericalError):
    pass


class NumericalInconsistency(NumericalError):
    pass


# ==========================
# PRECONDITION (exit 4)
# ==========================
class PreconditionError(FrflowError):
    exit_code = 4


class InvalidDistribution(PreconditionError):
    pass


class AbsoluteContinuityViolation(PreconditionError):
    pass


class DimensionMismatch(PreconditionError):
    pass


class InfeasibleConstraints(PreconditionError):
    pass


class SizeLimitExceeded(PreconditionError):
    pass


class TrivialProgram(PreconditionError):
    pass


class BoundNotApplicable(PreconditionError):
    pass


class InvalidTimeGrid(PreconditionError):
    pass


class ExplorationViolation(PreconditionError):
    pass


class EscortSingularity(PreconditionError):
    pass


class NotFactorizable(PreconditionError):
    def __init__(self, message="", residual=None):
        super().__init__(message, residual=residual)
        self.residual = residual
