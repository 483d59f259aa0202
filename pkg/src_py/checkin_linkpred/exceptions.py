class LinkpredException(Exception):
    """This is used as the base class for all checkin_linkpred
    exceptions. It can be used as a catchall for all other problems
    raised by the library.
    """


class InvalidConfig(LinkpredException, ValueError):
    """Raised when a ``PredictorConfig``, ``CheckinSchema``, run config
    file, or CLI override fails validation. The CLI maps this to exit
    code 2.
    """


class CheckinParseError(LinkpredException, ValueError):
    """The base class for all problems parsing a single check-in
    record. ``line_number`` is set by ``load_dataset`` (1-based) and is
    None when parsing a line directly.
    """
    line_number: int | None = None


class MalformedLine(CheckinParseError):
    """Raised when a check-in line has the wrong number of columns, or
    when its user or venue id is empty.
    """


class BadCoordinate(CheckinParseError):
    """Raised when a check-in latitude or longitude is not a number,
    or falls outside [-90, 90] / [-180, 180] respectively.
    """


class BadTimestamp(CheckinParseError):
    """Raised when a check-in timestamp cannot be parsed by any of the
    supported formats, or parses to a negative or non-finite value.
    """


class PairNotPresent(LinkpredException, LookupError):
    """Raised when you attempt to remove a user-venue pair that has no
    check-ins in the graph.
    """


class UnknownUser(LinkpredException, LookupError):
    """Raised when a user id is not part of the graph's user set."""


class UnknownVenue(LinkpredException, LookupError):
    """Raised when a venue id is not part of the graph's venue set."""


class IsolatedUser(LinkpredException, ValueError):
    """Raised by scorers that need the querying user to have at least
    one venue (NBI and its variants, assortativity, the metadata
    baselines), when the user has none in the graph being scored.
    """


class MissingVenueMeta(LinkpredException, LookupError):
    """Raised by the metadata baselines when the candidate venue has no
    category (type baseline) or no coordinates (location baseline).
    """


class SamplingError(LinkpredException, ValueError):
    """The base class for all problems constructing an evaluation
    sample.
    """


class EmptyGraph(SamplingError):
    """Raised when sampling positives from a graph without any
    connected user-venue pair.
    """


class NotEnoughNegatives(SamplingError):
    """Raised when the graph is too dense to draw as many unconnected
    pairs as the sample requires.
    """


class InvalidWindow(SamplingError):
    """Raised when a time window does not satisfy ``start < end``."""


class EmptyWindow(SamplingError):
    """Raised when no check-in falls inside the requested time
    window.
    """


class SampleMismatch(SamplingError):
    """Raised when a stored sample cannot be applied to a graph: one of
    its positives is missing from the graph, was stored with a
    different check-in count, or the sample has no residual graph at
    all.
    """


class EmptySample(LinkpredException, ValueError):
    """Raised when evaluating a sample that has no positive or no
    negative pairs.
    """


class ScorerError(LinkpredException, RuntimeError):
    """Raised by the evaluator when scoring a sample pair fails. The
    args carry the offending ``(user, venue)`` pair and the method, and
    the original exception is chained as ``__cause__``.
    """
