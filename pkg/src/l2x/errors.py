"""Exception types shared across the package."""

from __future__ import annotations

__all__ = ["NumericError", "ModelFormatError", "ModelVersionError", "CsvFormatError"]


class NumericError(RuntimeError):
    """A quantity that must be finite became NaN or infinite."""


class ModelFormatError(ValueError):
    """Malformed model payload; ``offset`` points at the failing byte."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ModelVersionError(ModelFormatError):
    """Payload is well-formed but written by an unsupported format version."""


class CsvFormatError(ValueError):
    """Malformed dataset CSV; ``line`` is the 1-based offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line
