"""Exception hierarchy shared by all modules."""


class APSetsError(Exception):
    """Base class for all errors raised by apsets."""


class InputError(APSetsError, ValueError):
    """Malformed or out-of-range input."""


class ParseError(InputError):
    """A point-set or lattice-subset file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InconclusiveWindow(APSetsError):
    """The finite window is too small to decide the question asked."""


class CriterionInvalid(APSetsError):
    """The one-sided almost-period criterion does not apply at this epsilon.

    Use :func:`apsets.almost_periods.bijection_match_oracle` instead.
    """


class NotFiniteType(APSetsError):
    """The difference set is not separated at window scale."""


class NoAlmostPeriods(InconclusiveWindow):
    """No nonzero almost period was found inside the search ball."""


class NotAlmostPeriod(APSetsError):
    """Snapping found no point matching the translated base point."""


class EpsilonTooLarge(APSetsError):
    """Snapping found more than one matching point."""


class OracleRefused(APSetsError):
    """The brute-force oracle refuses inputs above its size bound."""


class UndefinedStatistic(APSetsError):
    """A statistic was requested over an empty ball."""


class Unsupported(InputError):
    """The operation is not defined for this dimension."""


class RecognitionFailure(APSetsError):
    """A recognition stage stopped; ``verdict`` is ``not_crystal`` or ``inconclusive``."""

    def __init__(self, verdict, reason, **evidence):
        super().__init__(f"{verdict}: {reason}")
        self.verdict = verdict
        self.reason = reason
        self.evidence = evidence
