"""Exception hierarchy shared by every module."""


class QSelbergError(Exception):
    """Base class for all package errors."""


class DivisionByZero(QSelbergError, ZeroDivisionError):
    """A shifted-factorial denominator vanished (non-generic parameters)."""


class NonConvergent(QSelbergError):
    """An infinite product or series was requested outside its convergence region."""


class CapExceeded(QSelbergError):
    """Skew-symmetrization requested for more variables than the factorial cap."""


class NearCoincident(QSelbergError):
    """Evaluation point has (nearly) coincident coordinates."""


class Unsupported(QSelbergError):
    """No closed form is known for the requested (polynomial, point) pair."""


class NonGeneric(QSelbergError):
    """Parameters sit on a degeneracy locus of some matrix-entry formula."""

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class IndexOutOfRange(QSelbergError, IndexError):
    pass


class Degenerate(QSelbergError):
    """A Pochhammer denominator of the classical matrix vanished."""


class PoleHit(QSelbergError):
    """A lattice point of the Jackson sum lies on a pole of the weight."""


class NotConverged(QSelbergError):
    """Outer shell of a truncated lattice sum is not negligible."""


class ConditionViolated(NotConverged):
    """The convergence inequalities for the Jackson integral fail."""


class SeriesDiverged(QSelbergError):
    pass


class ParseError(QSelbergError, ValueError):
    """Malformed command-line input (polynomial spec, point, parameters)."""
