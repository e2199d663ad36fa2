"""Exception hierarchy shared by the library and the command line."""


class MDDError(Exception):
    """Base class for errors raised by mddconc."""


class InputError(MDDError, ValueError):
    """Invalid argument: wrong shape, too few samples, non-finite value."""


class ParseError(MDDError, ValueError):
    """Malformed input file."""


class MissingDataError(InputError):
    """The dataset has missing cells where a complete one is required."""


class ExtrapolationError(InputError):
    """Filling a missing cell would require extrapolating a curve."""


class DegenerateDataError(MDDError, ArithmeticError):
    """A variance estimate is exactly zero, so the statistic is undefined.

    Attributes
    ----------
    instant : int or None
        Index of the offending time instant, when known.
    replicate : int or None
        Index of the offending bootstrap replicate, when known.
    """

    def __init__(self, message, instant=None, replicate=None):
        super().__init__(message)
        self.instant = instant
        self.replicate = replicate
