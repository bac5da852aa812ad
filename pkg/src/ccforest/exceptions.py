"""Error types raised across the package.

Each error carries the process exit code the command line maps it to.
"""


class CCForestError(Exception):
    exit_code = 1


class InputFormatError(CCForestError):
    exit_code = 2


class MalformedRecord(InputFormatError):
    def __init__(self, path, line_no, reason):
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{self.path}:{line_no}: {reason}")


class UnknownStatement(InputFormatError):
    pass


class DuplicateTestId(InputFormatError):
    pass


class PreconditionError(CCForestError):
    exit_code = 3


class NoFailingTests(PreconditionError):
    pass


class DimensionMismatch(PreconditionError, ValueError):
    pass


class DegenerateInput(PreconditionError, ValueError):
    pass


class SingleClassTraining(PreconditionError, ValueError):
    pass


class EmptyMatrix(PreconditionError, ValueError):
    pass


class InsufficientPassing(PreconditionError):
    pass


class ChunksNotPartition(PreconditionError, ValueError):
    pass


class UnknownTestId(PreconditionError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class RunMismatch(PreconditionError):
    pass


class InfeasibleParams(CCForestError, ValueError):
    exit_code = 4
