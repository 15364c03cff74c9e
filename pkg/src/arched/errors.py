"""Error taxonomy shared across the package.

Every error carries a stable machine code so the HTTP layer and the CLI can
map failures without string matching.
"""

from __future__ import annotations

from typing import Any


class ArchedError(Exception):
    """Base class for all domain errors."""

    code = "internal"

    def __init__(self, message: str, detail: Any = None):
        super().__init__(message)
        self.message = message
        self.detail = detail


class InvalidInputError(ArchedError):
    code = "invalid-input"


class NotFoundError(ArchedError):
    code = "not-found"


class ConflictError(ArchedError):
    code = "conflict"


class InvalidTransitionError(ArchedError):
    code = "invalid-transition"


class UnknownObjectiveError(ArchedError):
    code = "unknown-objective"


class GenerationEmptyError(ArchedError):
    code = "generation-empty"


class DegenerateMarginalsError(ArchedError):
    code = "degenerate-marginals"


class UnstableEstimateError(ArchedError):
    code = "unstable-estimate"


class GatewayError(ArchedError):
    """Base for model-backend failures."""

    code = "backend-error"


class GatewayTimeoutError(GatewayError):
    code = "backend-timeout"


class GatewayRequestError(GatewayError):
    """Permanent HTTP failure from the backend (carries status and body excerpt)."""

    code = "backend-request"

    def __init__(self, message: str, status: int | None = None, body_excerpt: str = ""):
        super().__init__(message, detail={"status": status, "body_excerpt": body_excerpt})
        self.status = status
        self.body_excerpt = body_excerpt


class GatewayProtocolError(GatewayError):
    code = "backend-protocol"


class StructuredOutputError(GatewayError):
    """Model output never validated against the requested shape.

    ``detail["attempts"]`` keeps every raw response for the audit trail.
    """

    code = "structured-output"


class ServiceStartupError(ArchedError):
    code = "startup"
