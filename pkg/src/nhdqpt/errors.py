"""Exception types shared by the library and the command line."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid scenario file; the command line exits with status 2."""


class PreconditionError(ValueError):
    """Numerical precondition violated at momentum ``k``; exit status 3."""

    def __init__(self, message: str, k: float | None = None):
        if k is not None:
            message = f"{message} (k = {k!r})"
        super().__init__(message)
        self.k = k


class WindingError(PreconditionError):
    """Flow too coarse or vanishing, so its winding is undefined."""
