"""Model language: grammar, syntax tree and pretty printer.

Scripts look like a small subset of BUGS::

    model {
      for (i in 1:N) {
        y[i] ~ dnorm(mu, sigma)   # dnorm takes a standard deviation
      }
      mu ~ dnorm(0, 10)
      sigma ~ dunif(0, 20)
    }
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cache
import logging
from pathlib import Path
from typing import Any, Final, Union

from textx import TextXError, get_location, metamodel_from_str

from .const import MAX_SOURCE_BYTES
from .errors import DataError, ModelSyntaxError

_LOGGER = logging.getLogger(__name__)

GRAMMAR: Final = r"""
ModelScript:
    'model' '{' (statements+=Statement (';')?)* '}'
;
Statement:
    Loop | Stochastic | Deterministic
;
Loop:
    'for' '(' var=ID 'in' start=LoopBound ':' end=LoopBound ')'
    '{' (body+=Statement (';')?)* '}'
;
LoopBound:
    literal=Integer | name=ID
;
Stochastic:
    target=Variable '~' dist=ID '(' args*=Expression[','] ')'
;
Deterministic:
    target=Variable '<-' expr=Expression
;
Variable:
    name=ID ('[' index=Expression ']')?
;
Expression:
    first=Term (rest+=AddTail)*
;
AddTail:
    op=AdditiveOp term=Term
;
Term:
    first=Factor (rest+=MulTail)*
;
MulTail:
    op=MultiplicativeOp factor=Factor
;
Factor:
    (sign=AdditiveOp)? atom=Atom
;
Atom:
    Call | Number | Variable | Group
;
Call:
    func=ID '(' args+=Expression[','] ')'
;
Number:
    value=Decimal
;
Group:
    '(' expr=Expression ')'
;
AdditiveOp: '+' | '-';
MultiplicativeOp: '*' | '/';
Integer: /\d+/;
Decimal: /(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?/;
Comment: /#[^\n]*/;
"""

# Distribution name -> parameter names, in call order.
DISTRIBUTIONS: Final[dict[str, tuple[str, ...]]] = {
    "dbeta": ("a", "b"),
    "dnorm": ("mean", "sd"),
    "dbin": ("p", "n"),
    "dgamma": ("shape", "rate"),
    "dunif": ("lo", "hi"),
}

FUNCTIONS: Final = frozenset({"exp", "log", "sqrt", "logit", "ilogit"})


@cache
def _get_metamodel() -> Any:
    return metamodel_from_str(GRAMMAR, autokwd=True)


@dataclass(frozen=True)
class Span:
    """1-based source position."""

    line: int
    column: int


def _span() -> Any:
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Number:
    value: float
    span: Span | None = _span()


@dataclass(frozen=True)
class Name:
    """Scalar or indexed identifier."""

    name: str
    index: Expr | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class Negate:
    operand: Expr
    span: Span | None = _span()


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: Expr
    right: Expr
    span: Span | None = _span()


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple[Expr, ...]
    span: Span | None = _span()


Expr = Union[Number, Name, Negate, BinaryOp, Call]


@dataclass(frozen=True)
class Stochastic:
    """``target ~ dist(args)``."""

    target: Name
    dist: str
    args: tuple[Expr, ...]
    span: Span | None = _span()


@dataclass(frozen=True)
class Deterministic:
    """``target <- expr``."""

    target: Name
    expr: Expr
    span: Span | None = _span()


@dataclass(frozen=True)
class Loop:
    """``for (var in start:end) { body }``; bounds are literals or data names."""

    var: str
    start: int | str
    end: int | str
    body: tuple[Statement, ...]
    span: Span | None = _span()


Statement = Union[Stochastic, Deterministic, Loop]


@dataclass(frozen=True)
class ModelAst:
    statements: tuple[Statement, ...]


def _locate(obj: Any) -> Span:
    location = get_location(obj)
    return Span(location["line"], location["col"])


class _Builder:
    """Lowers textX model objects to the frozen syntax tree."""

    def statement(self, obj: Any) -> Statement:
        kind = type(obj).__name__
        span = _locate(obj)
        if kind == "Loop":
            return Loop(
                var=obj.var,
                start=self.bound(obj.start),
                end=self.bound(obj.end),
                body=tuple(self.statement(s) for s in obj.body),
                span=span,
            )
        if kind == "Stochastic":
            args = tuple(self.expression(a) for a in obj.args)
            params = DISTRIBUTIONS.get(obj.dist)
            if params is None:
                raise ModelSyntaxError(
                    f"unknown distribution {obj.dist}; expected one of {', '.join(DISTRIBUTIONS)}",
                    span.line,
                    span.column,
                )
            if len(args) != len(params):
                raise ModelSyntaxError(
                    f"{obj.dist} expects {len(params)} arguments ({', '.join(params)}), got {len(args)}",
                    span.line,
                    span.column,
                )
            return Stochastic(self.variable(obj.target), obj.dist, args, span)
        return Deterministic(self.variable(obj.target), self.expression(obj.expr), span)

    @staticmethod
    def bound(obj: Any) -> int | str:
        return int(obj.literal) if obj.literal else obj.name

    def variable(self, obj: Any) -> Name:
        index = self.expression(obj.index) if obj.index is not None else None
        return Name(obj.name, index, _locate(obj))

    def expression(self, obj: Any) -> Expr:
        kind = type(obj).__name__
        if kind == "Expression":
            result = self.term(obj.first)
            for tail in obj.rest:
                result = BinaryOp(tail.op, result, self.term(tail.term), result.span)
            return result
        if kind == "Variable":
            return self.variable(obj)
        if kind == "Number":
            return Number(float(obj.value), _locate(obj))
        if kind == "Group":
            return self.expression(obj.expr)
        if kind == "Call":
            span = _locate(obj)
            if obj.func not in FUNCTIONS:
                raise ModelSyntaxError(
                    f"unknown function {obj.func}; expected one of {', '.join(sorted(FUNCTIONS))}",
                    span.line,
                    span.column,
                )
            if len(obj.args) != 1:
                raise ModelSyntaxError(
                    f"{obj.func} expects 1 argument, got {len(obj.args)}", span.line, span.column
                )
            return Call(obj.func, tuple(self.expression(a) for a in obj.args), span)
        raise ModelSyntaxError(f"unexpected syntax element {kind}")

    def term(self, obj: Any) -> Expr:
        result = self.factor(obj.first)
        for tail in obj.rest:
            result = BinaryOp(tail.op, result, self.factor(tail.factor), result.span)
        return result

    def factor(self, obj: Any) -> Expr:
        atom = self.expression(obj.atom)
        if obj.sign == "-":
            return Negate(atom, _locate(obj))
        return atom


def parse(src: str | bytes) -> ModelAst:
    """Parse a model script.

    Args:
        src: Script text (str, or UTF-8 bytes), at most 1 MB

    Returns:
        Syntax tree with a source span on every statement

    Raises:
        DataError: If the source is too large or not UTF-8
        ModelSyntaxError: On lexical, syntax, unknown-name or arity errors
    """
    if isinstance(src, bytes):
        raw = src
        try:
            src = raw.decode("utf-8")
        except UnicodeDecodeError as err:
            raise DataError(f"model script is not valid UTF-8: {err}") from err
    else:
        raw = src.encode("utf-8")
    if len(raw) > MAX_SOURCE_BYTES:
        raise DataError(f"model script is {len(raw)} bytes; limit is {MAX_SOURCE_BYTES}")

    try:
        parsed = _get_metamodel().model_from_str(src)
    except TextXError as err:
        raise ModelSyntaxError(str(err.message), err.line, err.col) from err

    builder = _Builder()
    ast = ModelAst(tuple(builder.statement(s) for s in parsed.statements))
    _LOGGER.debug("Parsed model script with %d top-level statements", len(ast.statements))
    return ast


def parse_file(path: str | Path) -> ModelAst:
    """Read and parse a script file."""
    try:
        raw = Path(path).read_bytes()
    except OSError as err:
        raise DataError(f"cannot read model script {path}: {err.strerror}") from err
    return parse(raw)


# Pretty printing

_PRECEDENCE: Final = {"+": 1, "-": 1, "*": 2, "/": 2}


def _format_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def format_expression(expr: Expr) -> str:
    """Render an expression with the minimum parentheses that keep its shape."""
    if isinstance(expr, Number):
        return _format_number(expr.value)
    if isinstance(expr, Name):
        if expr.index is None:
            return expr.name
        return f"{expr.name}[{format_expression(expr.index)}]"
    if isinstance(expr, Call):
        return f"{expr.func}({', '.join(format_expression(a) for a in expr.args)})"
    if isinstance(expr, Negate):
        inner = format_expression(expr.operand)
        if isinstance(expr.operand, (BinaryOp, Negate)):
            inner = f"({inner})"
        return f"-{inner}"
    level = _PRECEDENCE[expr.op]
    left = format_expression(expr.left)
    if isinstance(expr.left, BinaryOp) and _PRECEDENCE[expr.left.op] < level:
        left = f"({left})"
    right = format_expression(expr.right)
    # operators associate to the left
    if isinstance(expr.right, BinaryOp) and _PRECEDENCE[expr.right.op] <= level:
        right = f"({right})"
    return f"{left} {expr.op} {right}"


def _format_statement(stmt: Statement, depth: int) -> list[str]:
    pad = "  " * depth
    if isinstance(stmt, Loop):
        lines = [f"{pad}for ({stmt.var} in {stmt.start}:{stmt.end}) {{"]
        for inner in stmt.body:
            lines.extend(_format_statement(inner, depth + 1))
        lines.append(f"{pad}}}")
        return lines
    target = format_expression(stmt.target)
    if isinstance(stmt, Stochastic):
        args = ", ".join(format_expression(a) for a in stmt.args)
        return [f"{pad}{target} ~ {stmt.dist}({args})"]
    return [f"{pad}{target} <- {format_expression(stmt.expr)}"]


def pretty_print(ast: ModelAst) -> str:
    """Canonical source text; parsing it gives back an equal tree."""
    lines = ["model {"]
    for stmt in ast.statements:
        lines.extend(_format_statement(stmt, 1))
    lines.append("}")
    return "\n".join(lines) + "\n"
