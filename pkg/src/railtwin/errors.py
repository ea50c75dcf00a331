"""Exception hierarchy shared across the engine."""

from __future__ import annotations

from typing import Any, Optional


class EngineError(Exception):
    """Base class for every error raised by this package."""

    code = "internal"

    def __init__(self, message: str, detail: Optional[Any] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail


class ValidationError(EngineError):
    """Caller-supplied input violates a precondition or invariant."""

    code = "validation"


class TemplateNotFoundError(ValidationError):
    pass


class DegenerateInputError(ValidationError):
    """Input is structurally valid but carries no usable content."""


class GenerationError(EngineError):
    """A backend produced unusable output (for example an empty caption)."""

    code = "backend"


class TransportError(EngineError):
    """The backend could not be reached or the connection failed."""

    code = "transport"


class RateLimitError(TransportError):
    """Backend throttled the request; retryable."""


class MalformedResponseError(EngineError):
    """Backend replied, but not in the expected wire shape."""

    code = "backend"


class FinetuneTimeoutError(EngineError):
    """A fine-tune job did not reach a terminal status within the budget."""

    code = "backend"

    def __init__(self, message: str, last_status: str, detail: Optional[Any] = None):
        super().__init__(message, detail)
        self.last_status = last_status


class ScoringError(EngineError):
    """A judge reply could not be parsed into a score."""

    code = "backend"

    def __init__(self, message: str, raw_reply: str = ""):
        super().__init__(message, detail={"raw_reply": raw_reply})
        self.raw_reply = raw_reply


class ProcessingError(EngineError):
    """Raw inference output could not be packaged into a consumable response."""


class StoreError(EngineError):
    """Persistence failure (I/O or serialization)."""


class RestoreError(StoreError):
    """A snapshot is missing or cannot be decoded."""

    code = "not_found"


class NotFoundError(EngineError):
    code = "not_found"
