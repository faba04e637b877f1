"""Exception types shared across the package."""


class SpanProjectError(Exception):
    """Base class for all errors raised by this package."""


class CorpusFormatError(SpanProjectError):
    """Malformed corpus input (CoNLL, JSONL, Pharaoh). Message carries the location."""


class ConfigurationError(SpanProjectError):
    """Invalid run configuration or unknown category."""


class MalformedBeamError(SpanProjectError):
    """A decoded beam with crossed or unclosed tags. Signaled, never fatal."""


class BackendError(SpanProjectError):
    """A backend call failed. ``retryable`` tells callers whether retrying makes sense."""

    def __init__(self, message: str, retryable: bool = True):
        super().__init__(message)
        self.retryable = retryable


class DegenerateScoreError(SpanProjectError):
    """A score is undefined (zero normalizer or zero embedding vector)."""


class EvaluationError(SpanProjectError):
    """Predicted and gold corpora do not line up."""
