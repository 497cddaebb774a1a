"""Exception types raised across the package."""


class SpanNCAError(Exception):
    """Base class for all errors raised by this package."""


class CorpusError(SpanNCAError, ValueError):
    pass


class MalformedLine(CorpusError):
    pass


class InvalidTag(CorpusError):
    pass


class InvalidTransition(CorpusError):
    pass


class SpanOutOfRange(CorpusError):
    pass


class DuplicateSpan(CorpusError):
    pass


class DimMismatch(CorpusError):
    pass


class ShapeMismatch(SpanNCAError, ValueError):
    pass


class BadShape(SpanNCAError, ValueError):
    pass


class NonScalarLoss(SpanNCAError, ValueError):
    pass


class EmptySupport(SpanNCAError, ValueError):
    pass


class DigestMismatch(SpanNCAError, ValueError):
    pass


class MisalignedCorpora(SpanNCAError, ValueError):
    pass


class DivergedLoss(SpanNCAError, RuntimeError):
    pass


class ConfigError(SpanNCAError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
