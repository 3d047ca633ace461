"""Exception types raised across the package."""


class DomainError(ValueError):
    """A numeric input lies outside the domain of a function (e.g. NaN)."""


class ValidationError(ValueError):
    """Input data violates a structural precondition."""


class ParseError(ValidationError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class UndefinedBoundError(ValueError):
    """A bound is undefined for the supplied arguments."""


class ContractError(ValueError):
    """Arguments are individually valid but jointly violate a bound's premise."""


class UnavailableError(LookupError):
    """A quantity needs information (typically target labels) that was not supplied."""


class OptimizationError(RuntimeError):
    """Raised when the minimizer meets a non-finite objective.

    ``x`` holds the last finite iterate.
    """

    def __init__(self, message, x=None, value=None, iterations=0):
        super().__init__(message)
        self.x = x
        self.value = value
        self.iterations = iterations
