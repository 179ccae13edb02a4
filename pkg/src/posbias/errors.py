"""Exception hierarchy shared by all modules."""


class PosBiasError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PosBiasError, ValueError):
    """Input data or arguments violate a documented invariant."""


class ParseError(ValidationError):
    """A record file could not be parsed.

    ``line`` is the 1-based line number of the offending record, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InconsistencyError(ValidationError):
    """Two inputs disagree (e.g. a ranker shown with two different rankings)."""


class UndefinedRatioError(PosBiasError, ZeroDivisionError):
    """A pairwise ratio has no clicks at its denominator position."""


class EstimationImpossibleError(PosBiasError):
    """The logs carry no intervention that links positions to position 1."""


class MetricUndefinedError(PosBiasError, ValueError):
    """An error metric was requested for a partially identified estimate."""
