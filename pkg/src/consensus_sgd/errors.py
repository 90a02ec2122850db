"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    pass


class UnsupportedError(ValueError):
    """An operation was asked for on an input it does not cover."""


class UnsupportedScheduleError(UnsupportedError):
    pass


class ParseError(ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ConvergenceError(RuntimeError):
    """Iterative method stopped at ``max_iter`` without meeting its tolerance.

    The best estimate seen so far is kept on the exception so callers can
    decide whether it is good enough.
    """

    def __init__(self, message, estimate=None, residual=None, iterations=None):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual
        self.iterations = iterations


class DivergenceError(FloatingPointError):
    def __init__(self, message, round_index=None):
        super().__init__(message)
        self.round_index = round_index


class GenerationError(RuntimeError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved
