"""Shared exception types."""

from __future__ import annotations


class TitletagError(Exception):
    """Base class for errors raised by this package."""


class FormatError(TitletagError):
    """A file does not conform to its documented on-disk format."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(prefix + message)


class TrainingDivergedError(TitletagError):
    """Training produced a non-finite loss."""
