"""Exception hierarchy shared by all modules.

Each class carries the process exit code the command-line harness maps it to.
"""


class BurgersLabError(Exception):
    exit_code = 1


class ParameterError(BurgersLabError, ValueError):
    exit_code = 2


class DimensionError(ParameterError):
    pass


class SizeError(ParameterError):
    pass


class ResolutionError(ParameterError):
    pass


class InvalidFieldError(ParameterError):
    pass


class InvalidPointError(ParameterError):
    pass


class DegenerateFieldError(ParameterError):
    pass


class FieldFormatError(ParameterError):
    pass


class SynthesisError(BurgersLabError):
    exit_code = 3


class StepSizeError(BurgersLabError):
    exit_code = 4

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class DivergenceError(BurgersLabError):
    exit_code = 4


class UnderflowError(BurgersLabError):
    exit_code = 3


class VerdictError(BurgersLabError):
    exit_code = 5
