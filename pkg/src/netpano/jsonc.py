"""JSONC parsing: JSON with // and /* */ comments and trailing commas.

Comments and trailing commas are blanked out in place (newlines preserved)
so that the positions reported by the underlying JSON parser still refer to
the original source text. Unquoted keys are rejected, as in standard JSON.
"""

from __future__ import annotations

import json

from .errors import SpecSyntaxError


def strip_jsonc(text: str) -> str:
    """Return `text` with comments and trailing commas replaced by spaces."""
    out = list(text)
    n = len(text)
    i = 0
    in_string = False
    while i < n:
        c = text[i]
        if in_string:
            if c == "\\":
                i += 2
                continue
            if c == '"':
                in_string = False
            i += 1
            continue
        if c == '"':
            in_string = True
            i += 1
            continue
        if c == "/" and i + 1 < n and text[i + 1] == "/":
            while i < n and text[i] != "\n":
                out[i] = " "
                i += 1
            continue
        if c == "/" and i + 1 < n and text[i + 1] == "*":
            start = i
            i += 2
            while i < n and not (text[i] == "*" and i + 1 < n and text[i + 1] == "/"):
                i += 1
            if i >= n:
                line, col = _position(text, start)
                raise SpecSyntaxError("unterminated block comment", line, col)
            end = i + 2
            for j in range(start, end):
                if out[j] != "\n":
                    out[j] = " "
            i = end
            continue
        i += 1

    # Blank trailing commas: a comma whose next non-space character is } or ].
    stripped = "".join(out)
    out = list(stripped)
    in_string = False
    i = 0
    while i < n:
        c = stripped[i]
        if in_string:
            if c == "\\":
                i += 2
                continue
            if c == '"':
                in_string = False
            i += 1
            continue
        if c == '"':
            in_string = True
        elif c == ",":
            j = i + 1
            while j < n and stripped[j] in " \t\r\n":
                j += 1
            if j < n and stripped[j] in "}]":
                out[i] = " "
        i += 1
    return "".join(out)


def loads(text: str):
    """Parse JSONC text into Python values.

    Raises SpecSyntaxError with 1-based line/column on malformed input.
    """
    if not text.strip():
        raise SpecSyntaxError("empty specification", 1, 1)
    cleaned = strip_jsonc(text)
    try:
        return json.loads(cleaned)
    except json.JSONDecodeError as e:
        raise SpecSyntaxError(e.msg, e.lineno, e.colno) from None


def _position(text: str, index: int) -> tuple[int, int]:
    line = text.count("\n", 0, index) + 1
    col = index - (text.rfind("\n", 0, index) + 1) + 1
    return line, col
