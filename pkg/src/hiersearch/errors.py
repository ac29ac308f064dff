"""Exceptions shared by the remote clients."""

from __future__ import annotations


class BackendError(RuntimeError):
    """A remote service (LLM, embedder, web search) could not serve a request."""


class TransportError(BackendError):
    """Request failed after retries; carries how many attempts were made and the last HTTP status."""

    def __init__(self, message: str, *, attempts: int, status: int | None = None) -> None:
        super().__init__(f"{message} (attempts={attempts}, last_status={status})")
        self.attempts = attempts
        self.status = status


class AuthError(BackendError):
    pass


class QuotaError(BackendError):
    pass
