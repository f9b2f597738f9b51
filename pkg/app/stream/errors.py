"""
Stream engine exceptions.
"""

from __future__ import annotations

from typing import Optional


class SpecError(Exception):
    """Monitor specification rejected at parse or compile time."""


class SpecSyntaxError(SpecError):
    """Source text does not match the grammar."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UndefinedIdentifierError(SpecError):
    """Name used but never declared."""

    def __init__(self, name: str, line: Optional[int] = None, column: Optional[int] = None):
        where = f" at line {line}, column {column}" if line else ""
        super().__init__(f"undefined identifier {name!r}{where}")
        self.name = name
        self.line = line
        self.column = column


class KindMismatchError(SpecError):
    """Operands of incompatible scalar kinds."""


class DuplicateStreamError(SpecError):
    """Two declarations share a name."""


class IllegalCycleError(SpecError):
    """Dependency cycle that does not pass through last()."""


class ArityError(SpecError):
    """Builtin called with the wrong number or shape of arguments."""


class StreamRuntimeError(Exception):
    """Error while feeding events into a compiled monitor."""


class TimestampRegressionError(StreamRuntimeError):
    """Event older than, or simultaneous with, an event already seen on its stream."""


class UnknownStreamError(StreamRuntimeError):
    """Event for a stream that is not a declared input."""


class TraceFormatError(ValueError):
    """Malformed line in a playground trace."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
