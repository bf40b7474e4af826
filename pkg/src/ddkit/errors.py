"""Exception types shared across ddkit."""


class InvalidArgument(ValueError):
    """Bad input: out-of-range parameter, malformed sequence, bad schema."""


class NumericFailure(ArithmeticError):
    """A numerical routine did not reach its tolerance.

    Carries the best estimate reached and a bound on its error so callers
    can decide whether the partial result is still usable.
    """

    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class NotFound(LookupError):
    """A root or crossing was not bracketed inside the search window."""

    def __init__(self, message, last_value=None):
        super().__init__(message)
        self.last_value = last_value


class FitFailure(RuntimeError):
    """A least-squares fit could not be performed on the supplied data."""
