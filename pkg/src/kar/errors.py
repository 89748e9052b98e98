"""Shared exception types.

Validation failures raise plain ValueError with stable message fragments;
provider (embedder / LLM / STT / TTS) failures raise ProviderError carrying
the pipeline stage that failed, so callers and the HTTP service can report
which stage broke without parsing messages.
"""

from __future__ import annotations


class ProviderError(RuntimeError):
    """A provider call failed. `stage` names the pipeline stage."""

    retryable = False

    def __init__(self, message: str, stage: str, status_code: int | None = None):
        super().__init__(message)
        self.stage = stage
        self.status_code = status_code


class ProviderTimeout(ProviderError):
    """A provider call timed out; safe to retry."""

    retryable = True


class TransientProviderError(ProviderError):
    """A provider returned a 5xx-style failure; safe to retry."""

    retryable = True
