"""
Exception hierarchy for the TRUST toolkit.
"""


class TrustError(Exception):
    """Base class for every error raised by this package."""


class DataError(TrustError, ValueError):
    """Raised for unreadable, malformed or schema-mismatched data."""


class DegenerateSystemError(TrustError):
    """Raised when a least-squares system is rank deficient."""


class ModelFormatError(TrustError, ValueError):
    """Raised when a model file cannot be decoded."""


class LlmError(TrustError):
    """Raised when the chat endpoint cannot be used."""


class ChatRequestError(LlmError):
    """Raised when the chat endpoint rejects a request (HTTP 4xx)."""

    def __init__(self, status_code: int, excerpt: str):
        self.status_code = status_code
        self.excerpt = excerpt
        super().__init__(f"chat endpoint returned HTTP {status_code}: {excerpt}")
