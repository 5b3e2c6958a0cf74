"""Exception taxonomy shared across the pipeline."""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PipelineError):
    """A domain object violates one of its invariants."""


class InvalidInputError(PipelineError, ValueError):
    """An operation was called with arguments outside its precondition."""


class BackendError(PipelineError):
    """A model backend failed (adapter failure, malformed response, timeout)."""

    def __init__(self, backend_id: str, message: str):
        self.backend_id = backend_id
        super().__init__(f"[{backend_id}] {message}")


class UnsupportedCapabilityError(BackendError):
    """The backend does not support the requested signal (e.g. attention)."""


class EmptyResponseError(BackendError):
    """A captioner returned empty text."""


class ClipUnavailableError(PipelineError):
    """No source video and no frame store; the clip cannot be materialized."""


class MalformedContainerError(PipelineError):
    """A feature container is missing datasets or holds inconsistent shapes."""


class CacheIntegrityError(PipelineError):
    """A cache key was re-written with different bytes."""


class UndefinedSimilarityError(PipelineError, ValueError):
    """Cosine similarity requested for a zero vector."""
