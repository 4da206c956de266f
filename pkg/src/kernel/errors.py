"""
errors.py
=========
Exception hierarchy shared by every specdb stage.

Transaction failure is NOT an exception: the executor returns a ``Failure``
value. Everything here is a user-facing error that the CLI maps to exit 1.
"""

from dataclasses import dataclass
from typing import List, Optional


@dataclass(frozen=True)
class SourceSpan:
    """Character range of an AST node inside a specification file."""

    file: str
    start: int
    end: int
    line: int = 0
    column: int = 0

    def __str__(self) -> str:
        if self.line:
            return f"{self.file}:{self.line}:{self.column}"
        return f"{self.file}:{self.start}"


class SpecDBError(Exception):
    """Root of all specdb errors."""


class ParseError(SpecDBError):
    def __init__(self, message: str, span: Optional[SourceSpan] = None):
        self.message = message
        self.span = span
        where = f"{span}: " if span else ""
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class Violation:
    message: str
    span: Optional[SourceSpan] = None

    def __str__(self) -> str:
        return f"{self.span}: {self.message}" if self.span else self.message


class SpecTypeError(SpecDBError):
    """Carries the full TypeErrorReport: every violation found, in source order."""

    def __init__(self, report: List[Violation]):
        self.report = list(report)
        lines = "\n".join(f"  - {v}" for v in self.report)
        super().__init__(f"{len(self.report)} type error(s):\n{lines}")


class SchemaError(SpecDBError):
    pass


class SessionError(SpecDBError):
    pass


class OracleOverflowError(SpecDBError):
    pass


class BudgetExceeded(SpecDBError):
    """Raised inside the executor when the step budget runs out."""

    def __init__(self, what: str, limit: int):
        self.what = what
        self.limit = limit
        super().__init__(f"{what} budget of {limit:,} exceeded")
