"""Exception hierarchy shared by every cbrt module."""


class CbrtError(Exception):
    """Base class for all domain errors."""


class MeanIsZero(CbrtError):
    """Relative variance is undefined for a column whose mean is zero."""


class DimensionMismatch(CbrtError):
    """Rank table and weight vector shapes disagree."""


class RuleCountOverflow(CbrtError, OverflowError):
    """Classic rule count exceeds the representable range."""


class TableFormatError(CbrtError):
    """A metric table could not be parsed or violates its invariants."""


class CoincidentNodes(CbrtError):
    """Two nodes share a position where a bearing between them is needed."""


class NotInSurvivalArea(CbrtError):
    """The relay is not inside the survival area of the source."""


class NoBracket(CbrtError):
    """A root finder was given an interval without a sign change."""


class Unreachable(CbrtError):
    """The requested survival area cannot be produced at this distance."""


class ConfigError(CbrtError):
    """Invalid experiment configuration.

    Messages carry ``path:line: detail`` whenever the source line is known.
    """


class NoCandidates(CbrtError):
    """No eligible relay is left for a packet at this hop."""


class Dropped(CbrtError):
    """A packet exhausted its retransmissions."""
