"""The side-effect-free expression language used in calculate/filter/encoding.

Grammar (by increasing precedence): ternary `?:`, `||`, `&&`, comparisons
(`== != < <= > >=`), `+ -`, `* / %`, unary `! -`, member access and calls.
Only three root names are readable (`datum`, `bounds`, `parameters`), and
calls are restricted to a whitelist; everything else is rejected at parse
time, so expressions cannot reach host state.

Semantics are strict: arithmetic on non-numbers, comparing a number with a
string, or dividing by zero all raise ExprEvalError instead of coercing.
A field that is explicitly null propagates through member access; a field
name that does not exist in the record is an error (typo detection).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Any, Callable, Mapping

from .errors import ExprEvalError, ExprSyntaxError

Value = Any  # number | str | bool | None (lists appear transiently for length/includes)

ROOT_NAMES = ("datum", "bounds", "parameters")

#: name -> (min arity, max arity); implementations live in _FUNC_IMPLS.
FUNCTIONS: dict[str, tuple[int, int]] = {
    "abs": (1, 1),
    "min": (2, 64),
    "max": (2, 64),
    "floor": (1, 1),
    "ceil": (1, 1),
    "round": (1, 1),
    "sqrt": (1, 1),
    "log": (1, 1),
    "pow": (2, 2),
    "length": (1, 1),
    "lower": (1, 1),
    "upper": (1, 1),
    "includes": (2, 2),
    "if": (3, 3),
}


# --- AST ---------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: Value


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Member:
    obj: "Node"
    field: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Ternary:
    cond: "Node"
    then: "Node"
    other: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Node", ...]


Node = Literal | Name | Member | Unary | Binary | Ternary | Call


@dataclass(frozen=True)
class Expression:
    """A parsed expression: original source plus its AST."""

    source: str
    ast: Node


@dataclass
class EvalScope:
    """Names visible to an expression.

    `datum` is the current element's record, `bounds` the parent bounding
    box ({x, y, width, height}) when inside a nested vis, `parameters` the
    current parameter values. `functions` holds context-specific extras
    (e.g. neighborMean during network calculate steps).
    """

    datum: Mapping[str, Value] | None = None
    bounds: Mapping[str, Value] | None = None
    parameters: Mapping[str, Value] | None = None
    functions: Mapping[str, Callable[..., Value]] | None = None


# --- Tokenizer ---------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+*/%<>!?:().,])
    """,
    re.VERBOSE,
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, extra_functions: frozenset[str]):
        self.source = source
        self.tokens = _tokenize(source)
        self.index = 0
        self.functions = set(FUNCTIONS) | set(extra_functions)

    def peek(self):
        return self.tokens[self.index]

    def next(self):
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.next()
        if text != value:
            raise ExprSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self) -> Node:
        node = self.ternary()
        kind, text, pos = self.peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected {text!r}", pos)
        return node

    def ternary(self) -> Node:
        cond = self.logical_or()
        if self.peek()[1] == "?":
            self.next()
            then = self.ternary()
            self.expect(":")
            other = self.ternary()
            return Ternary(cond, then, other)
        return cond

    def logical_or(self) -> Node:
        node = self.logical_and()
        while self.peek()[1] == "||":
            self.next()
            node = Binary("||", node, self.logical_and())
        return node

    def logical_and(self) -> Node:
        node = self.comparison()
        while self.peek()[1] == "&&":
            self.next()
            node = Binary("&&", node, self.comparison())
        return node

    def comparison(self) -> Node:
        node = self.additive()
        while self.peek()[1] in ("==", "!=", "<", "<=", ">", ">="):
            op = self.next()[1]
            node = Binary(op, node, self.additive())
        return node

    def additive(self) -> Node:
        node = self.multiplicative()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            node = Binary(op, node, self.multiplicative())
        return node

    def multiplicative(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/", "%"):
            op = self.next()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, text, pos = self.peek()
        if text in ("!", "-"):
            self.next()
            return Unary(text, self.unary())
        return self.postfix()

    def postfix(self) -> Node:
        node = self.primary()
        while self.peek()[1] == ".":
            self.next()
            kind, text, pos = self.next()
            if kind != "name":
                raise ExprSyntaxError("expected field name after '.'", pos)
            node = Member(node, text)
        return node

    def primary(self) -> Node:
        kind, text, pos = self.next()
        if kind == "number":
            is_float = "." in text or "e" in text or "E" in text
            return Literal(float(text) if is_float else int(text))
        if kind == "string":
            return Literal(_unescape_string(text, pos))
        if text == "(":
            node = self.ternary()
            self.expect(")")
            return node
        if kind == "name":
            if text == "true":
                return Literal(True)
            if text == "false":
                return Literal(False)
            if text == "null":
                return Literal(None)
            if self.peek()[1] == "(":
                return self.call(text, pos)
            if text not in ROOT_NAMES:
                raise ExprSyntaxError(f"unknown name {text!r} (only datum, bounds, parameters are readable)", pos)
            return Name(text)
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", pos)

    def call(self, func: str, pos: int) -> Node:
        if func not in self.functions:
            raise ExprSyntaxError(f"unknown function {func!r}", pos)
        self.expect("(")
        args: list[Node] = []
        if self.peek()[1] != ")":
            args.append(self.ternary())
            while self.peek()[1] == ",":
                self.next()
                args.append(self.ternary())
        self.expect(")")
        if func in FUNCTIONS:
            lo, hi = FUNCTIONS[func]
            if not (lo <= len(args) <= hi):
                raise ExprSyntaxError(f"function {func!r} takes {lo}..{hi} arguments, got {len(args)}", pos)
        return Call(func, tuple(args))


def _unescape_string(raw: str, pos: int) -> str:
    body = raw[1:-1]
    if raw[0] == "'":
        body = body.replace("\\'", "'").replace('"', '\\"')
    try:
        return json.loads('"' + body + '"')
    except json.JSONDecodeError:
        raise ExprSyntaxError("invalid string literal", pos) from None


def parse_expression(source: str, extra_functions: frozenset[str] = frozenset()) -> Expression:
    """Parse `source` into an Expression. `extra_functions` whitelists
    context-specific callables (their implementations come via EvalScope)."""
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return Expression(source, _Parser(source, extra_functions).parse())


# --- Evaluation --------------------------------------------------------


def _is_number(v: Value) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _require_number(v: Value, what: str) -> float:
    if not _is_number(v):
        raise ExprEvalError(f"{what} requires a number, got {_type_name(v)}")
    return v


def _require_bool(v: Value, what: str) -> bool:
    if not isinstance(v, bool):
        raise ExprEvalError(f"{what} requires a boolean, got {_type_name(v)}")
    return v


def _type_name(v: Value) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "boolean"
    if isinstance(v, (int, float)):
        return "number"
    if isinstance(v, str):
        return "string"
    return type(v).__name__


def _round_half_away(x: float) -> float:
    return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)


_FUNC_IMPLS: dict[str, Callable[..., Value]] = {
    "abs": lambda x: abs(_require_number(x, "abs")),
    "min": lambda *xs: min(_require_number(x, "min") for x in xs),
    "max": lambda *xs: max(_require_number(x, "max") for x in xs),
    "floor": lambda x: math.floor(_require_number(x, "floor")),
    "ceil": lambda x: math.ceil(_require_number(x, "ceil")),
    "round": lambda x: _round_half_away(_require_number(x, "round")),
    "lower": lambda s: _require_str(s, "lower").lower(),
    "upper": lambda s: _require_str(s, "upper").upper(),
}


def _require_str(v: Value, what: str) -> str:
    if not isinstance(v, str):
        raise ExprEvalError(f"{what} requires a string, got {_type_name(v)}")
    return v


def _fn_sqrt(x):
    x = _require_number(x, "sqrt")
    if x < 0:
        raise ExprEvalError("sqrt of a negative number")
    return math.sqrt(x)


def _fn_log(x):
    x = _require_number(x, "log")
    if x <= 0:
        raise ExprEvalError("log of a non-positive number")
    return math.log(x)


def _fn_pow(x, y):
    return math.pow(_require_number(x, "pow"), _require_number(y, "pow"))


def _fn_length(v):
    if isinstance(v, str) or isinstance(v, (list, tuple)):
        return len(v)
    raise ExprEvalError(f"length requires a string or list, got {_type_name(v)}")


def _fn_includes(container, item):
    if isinstance(container, str):
        return _require_str(item, "includes") in container
    if isinstance(container, (list, tuple)):
        return item in container
    raise ExprEvalError(f"includes requires a string or list, got {_type_name(container)}")


_FUNC_IMPLS.update(sqrt=_fn_sqrt, log=_fn_log, pow=_fn_pow, length=_fn_length, includes=_fn_includes)


def eval_expression(expr: Expression, scope: EvalScope) -> Value:
    """Evaluate a parsed expression in `scope`. Pure: the scope is never
    mutated and equal inputs give equal outputs."""
    return _eval(expr.ast, scope)


def _eval(node: Node, scope: EvalScope) -> Value:
    if isinstance(node, Literal):
        return node.value
    if isinstance(node, Name):
        record = getattr(scope, node.id)
        if record is None:
            raise ExprEvalError(f"{node.id!r} is not available in this context")
        return record
    if isinstance(node, Member):
        obj = _eval(node.obj, scope)
        if obj is None:
            return None  # null propagates through member access
        if not isinstance(obj, Mapping):
            raise ExprEvalError(f"cannot access field {node.field!r} of a {_type_name(obj)}")
        if node.field not in obj:
            raise ExprEvalError(f"unknown field {node.field!r}")
        return obj[node.field]
    if isinstance(node, Unary):
        v = _eval(node.operand, scope)
        if node.op == "-":
            return -_require_number(v, "unary '-'")
        return not _require_bool(v, "'!'")
    if isinstance(node, Binary):
        return _eval_binary(node, scope)
    if isinstance(node, Ternary):
        cond = _require_bool(_eval(node.cond, scope), "ternary condition")
        return _eval(node.then if cond else node.other, scope)
    if isinstance(node, Call):
        if node.func == "if":  # lazy: untaken branch is not evaluated
            cond = _require_bool(_eval(node.args[0], scope), "if condition")
            return _eval(node.args[1] if cond else node.args[2], scope)
        args = [_eval(a, scope) for a in node.args]
        impl = _FUNC_IMPLS.get(node.func)
        if impl is None:
            impl = (scope.functions or {}).get(node.func)
            if impl is None:
                raise ExprEvalError(f"function {node.func!r} is not available in this context")
        return impl(*args)
    raise ExprEvalError(f"unknown AST node {node!r}")


def _eval_binary(node: Binary, scope: EvalScope) -> Value:
    op = node.op
    if op == "&&":
        left = _require_bool(_eval(node.left, scope), "'&&'")
        return left and _require_bool(_eval(node.right, scope), "'&&'")
    if op == "||":
        left = _require_bool(_eval(node.left, scope), "'||'")
        return left or _require_bool(_eval(node.right, scope), "'||'")

    left = _eval(node.left, scope)
    right = _eval(node.right, scope)

    if op in ("==", "!="):
        if left is None or right is None:
            equal = left is None and right is None
        elif isinstance(left, bool) != isinstance(right, bool) or (
            _is_number(left) != _is_number(right)
        ) or (isinstance(left, str) != isinstance(right, str)):
            raise ExprEvalError(f"cannot compare {_type_name(left)} with {_type_name(right)}")
        else:
            equal = left == right
        return equal if op == "==" else not equal

    if op in ("<", "<=", ">", ">="):
        both_numbers = _is_number(left) and _is_number(right)
        both_strings = isinstance(left, str) and isinstance(right, str)
        if not (both_numbers or both_strings):
            raise ExprEvalError(
                f"cannot order {_type_name(left)} against {_type_name(right)}"
            )
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        return left >= right

    ln = _require_number(left, f"'{op}'")
    rn = _require_number(right, f"'{op}'")
    if op == "+":
        return ln + rn
    if op == "-":
        return ln - rn
    if op == "*":
        return ln * rn
    if op == "/":
        if rn == 0:
            raise ExprEvalError("division by zero")
        return ln / rn
    if op == "%":
        if rn == 0:
            raise ExprEvalError("modulo by zero")
        return ln % rn
    raise ExprEvalError(f"unknown operator {op!r}")


# --- Pretty printing ---------------------------------------------------


def to_source(node: Node) -> str:
    """Render an AST back to (fully parenthesized) source text.

    parse(to_source(parse(s).ast)).ast == parse(s).ast for all valid s.
    """
    if isinstance(node, Literal):
        if node.value is None:
            return "null"
        if isinstance(node.value, bool):
            return "true" if node.value else "false"
        if isinstance(node.value, str):
            return json.dumps(node.value)
        return repr(node.value)
    if isinstance(node, Name):
        return node.id
    if isinstance(node, Member):
        return f"{to_source(node.obj)}.{node.field}"
    if isinstance(node, Unary):
        return f"({node.op}{to_source(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Ternary):
        return f"({to_source(node.cond)} ? {to_source(node.then)} : {to_source(node.other)})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_source(a) for a in node.args)})"
    raise ValueError(f"unknown node {node!r}")


def collect_references(node: Node) -> set[str]:
    """Names of parameters referenced via `parameters.<name>` anywhere in
    the AST (used for dependency tracking and parameter-sensitivity)."""
    refs: set[str] = set()

    def walk(n: Node):
        if isinstance(n, Member) and isinstance(n.obj, Name) and n.obj.id == "parameters":
            refs.add(n.field)
        if isinstance(n, Member):
            walk(n.obj)
        elif isinstance(n, Unary):
            walk(n.operand)
        elif isinstance(n, Binary):
            walk(n.left)
            walk(n.right)
        elif isinstance(n, Ternary):
            walk(n.cond)
            walk(n.then)
            walk(n.other)
        elif isinstance(n, Call):
            for a in n.args:
                walk(a)

    walk(node)
    return refs
