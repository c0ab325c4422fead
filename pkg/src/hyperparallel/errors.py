"""Exception types shared by every engine."""

from __future__ import annotations


class HyperParallelError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(HyperParallelError, ValueError):
    """A configuration document or argument failed validation.

    ``field`` names the offending key; ``source`` and ``line`` are filled in
    when the value came from a file.
    """

    def __init__(self, message: str, *, field: str | None = None,
                 source: str | None = None, line: int | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.field = field
        self.source = source
        self.line = line

    def located(self) -> str:
        where = ""
        if self.source:
            where = self.source if self.line is None else f"{self.source}:{self.line}"
            where += ": "
        return where + self.message

    def __str__(self) -> str:
        return self.located()


class InfeasibleError(HyperParallelError):
    """The request is well-formed but cannot be satisfied (e.g. a block larger than HBM)."""


class IntegrityError(HyperParallelError):
    """Internal consistency check failed; indicates a bug in an executor or plan."""
