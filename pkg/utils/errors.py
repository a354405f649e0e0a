class FinslerError(ValueError):
    """Base class for errors the command line maps to an exit code."""

    exit_code = 1


class MetricSyntaxError(FinslerError):
    exit_code = 2

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = "line {}, column {}: {}".format(line, column, message)
        super().__init__(message)


class DomainError(FinslerError):
    exit_code = 3


class DegenerateMetricError(FinslerError):
    exit_code = 4


class InsufficientOrdersError(FinslerError):
    exit_code = 5
