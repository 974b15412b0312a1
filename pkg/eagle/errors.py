"""Exception hierarchy shared by every stage of the pipeline.

Each class carries the process exit code the CLI returns when it escapes.
"""


class EagleError(Exception):
    """Base class for all errors raised by eagle"""
    exit_code = 1
    # pipeline stage the error escaped from, when raised under end_to_end
    stage = None


class UsageError(EagleError):
    exit_code = 2


class DataError(EagleError):
    exit_code = 3


class SchemaError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class SplitError(DataError):
    pass


class GraphError(DataError):
    pass


class CompatibilityError(DataError):
    pass


class CalibrationError(DataError):
    pass


class UndefinedMetricError(DataError):
    """A metric has no value on the given labels, e.g. AUC with one class"""
    pass


class ConfigError(DataError):
    pass


class LeakageError(EagleError):
    """A feature violates one of the leakage rules of the audit"""
    exit_code = 4

    def __init__(self, message, column=None, rule=None):
        super().__init__(message)
        self.column = column
        self.rule = rule


class NumericError(EagleError):
    exit_code = 5

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ShapeError(NumericError):
    pass


class DomainError(NumericError):
    pass


class FormatError(EagleError):
    exit_code = 6


class IOFailure(EagleError):
    exit_code = 6
