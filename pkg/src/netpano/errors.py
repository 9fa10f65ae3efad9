"""Error types shared across the engine.

Every error raised while evaluating a specification carries enough context
to point the user at the offending construct (and, for syntax errors, the
exact line/column in the JSONC source).
"""

from __future__ import annotations


class NetpanoError(Exception):
    """Base class for all engine errors."""


class SpecSyntaxError(NetpanoError):
    """Malformed JSONC input. Carries 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class SpecValidationError(NetpanoError):
    """Structurally invalid specification (missing fields, duplicate names...)."""

    def __init__(self, message: str, construct: str | None = None):
        super().__init__(message)
        self.construct = construct


class DependencyError(SpecValidationError):
    """Dangling or cyclic references between named constructs."""


class ExprSyntaxError(NetpanoError):
    """Expression source failed to parse. Carries 0-based character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ExprEvalError(NetpanoError):
    """Expression evaluation failed: unbound name, type mismatch, division by zero."""


class DataError(NetpanoError):
    """Data loading or table-transform failure."""


class NetworkError(NetpanoError):
    """Network construction or network-transform failure."""


class OrderingError(NetpanoError):
    """Ordering/seriation failure."""


class LayoutError(NetpanoError):
    """Layout computation failure."""


class ScaleError(NetpanoError):
    """Scale resolution or application failure."""


class EncodingError(NetpanoError):
    """Scene-graph construction failure."""


class RuntimeEvalError(NetpanoError):
    """Evaluation pipeline failure, tagged with the construct being evaluated."""

    def __init__(self, message: str, construct: str | None = None):
        super().__init__(message)
        self.construct = construct


class EventError(NetpanoError):
    """Invalid interaction event."""


class Warnings:
    """Ordered collector for non-fatal diagnostics emitted during evaluation."""

    def __init__(self):
        self.messages: list[str] = []

    def warn(self, message: str) -> None:
        self.messages.append(message)

    def extend(self, other: "Warnings") -> None:
        self.messages.extend(other.messages)

    def __iter__(self):
        return iter(self.messages)

    def __len__(self):
        return len(self.messages)
