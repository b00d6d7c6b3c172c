"""Engine error hierarchy with stable machine-readable codes.

Every error the engine raises maps to one of four codes; the HTTP service
and the CLI translate them into the error envelope {code, message, detail}.
"""

from __future__ import annotations

from typing import Any


class EngineError(Exception):
    """Base class for all engine failures."""

    code = "validation"

    def __init__(self, message: str, detail: Any = None):
        super().__init__(message)
        self.message = message
        self.detail = detail

    def envelope(self) -> dict:
        return {"code": self.code, "message": self.message, "detail": self.detail}


class ValidationError(EngineError):
    """Malformed input, violated precondition, or schema problem."""

    code = "validation"


class UnknownIdError(EngineError):
    """A referenced artifact, session, or job does not exist."""

    code = "unknown-id"


class WrongStatusError(EngineError):
    """The operation is illegal in the session's current status."""

    code = "wrong-status"


class BackendFailure(EngineError):
    """A generator or judge backend failed after exhausting retries."""

    code = "backend-failure"
