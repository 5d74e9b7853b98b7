"""Exception types. Each carries the CLI exit code it maps to."""


class PNormFlowError(Exception):
    exit_code = 1


class ParseError(PNormFlowError):
    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GraphValidationError(ParseError):
    pass


class ConnectivityError(GraphValidationError):
    pass


class ParameterError(PNormFlowError, ValueError):
    exit_code = 2


class UnsupportedExponentError(ParameterError):
    pass


class InfeasibleMassError(PNormFlowError, ValueError):
    exit_code = 3


class BudgetExceededError(PNormFlowError):
    exit_code = 4

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class UndefinedConductanceError(PNormFlowError, ValueError):
    pass


class NoClusterError(PNormFlowError):
    pass


class StaleSolutionError(PNormFlowError):
    pass


class LineSearchError(PNormFlowError, RuntimeError):
    """Bracketing failed; the partial gradient was not monotone. Indicates a bug."""
