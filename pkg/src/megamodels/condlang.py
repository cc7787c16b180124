"""Condition expressions over transition execution bookkeeping.

Conditions branch the control flow of a megamodel using only the
interpreter-maintained per-transition information (``count``, ``time``,
``taken``) and the current clock value (``now``). They deliberately have no
access to model contents or operation internals.

Grammar::

    expr := or ; or := and { "or" and } ; and := cmp { "and" cmp } ;
    cmp  := sum [ ("<"|"<="|">"|">="|"=="|"!=") sum ]
          | "not" cmp | "taken" "(" ref ")" | "true" | "false" ;
    sum  := term { ("+"|"-") term } ; term := atom { ("*"|"/") atom } ;
    atom := INT | "now" | "count" "(" ref ")" | "time" "(" ref ")" | "(" expr ")" ;
    ref  := IDENT "." IDENT

A ``ref`` names a transition by its source operation id plus either the
status label (operations with status exits) or the target operation id
(initial and decision sources).

Arithmetic is signed 64-bit with checked overflow; division truncates
toward zero. A transition that was never taken reads as ``time == 0`` and
``taken(...) == false``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Mapping

from .errors import (
    ERR_DIV_ZERO,
    ERR_OVERFLOW,
    ERR_SYNTAX,
    ERR_TYPE,
    ERR_UNRESOLVED_REF,
    EvalError,
    ParseError,
    SourceSpan,
)

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

CMP_OPS = ("<", "<=", ">", ">=", "==", "!=")
ARITH_OPS = ("+", "-", "*", "/")
BOOL_OPS = ("and", "or")


@dataclass(frozen=True)
class TransitionRef:
    """Names one transition: source operation id + status label or target id."""

    operation: str
    label: str

    def __str__(self) -> str:
        return f"{self.operation}.{self.label}"


class Expr:
    """Base class for condition AST nodes."""


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class Count(Expr):
    ref: TransitionRef


@dataclass(frozen=True)
class Time(Expr):
    ref: TransitionRef


@dataclass(frozen=True)
class Taken(Expr):
    ref: TransitionRef


@dataclass(frozen=True)
class Now(Expr):
    pass


@dataclass(frozen=True)
class Arith(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Cmp(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class BoolOp(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Not(Expr):
    expr: Expr


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|==|!=|<|>|\+|-|\*|/|\(|\)|\.))"
)

_KEYWORDS = frozenset({"and", "or", "not", "true", "false", "now", "count", "time", "taken"})


@dataclass
class _Token:
    kind: str  # "int" | "ident" | "op" | "eof"
    text: str
    pos: int  # 0-based offset into the condition text


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_at = len(text) - len(stripped)
            raise _syntax_error(f"unexpected character {text[bad_at]!r}", bad_at)
        if m.group("int") is not None:
            tokens.append(_Token("int", m.group("int"), m.start("int")))
        elif m.group("ident") is not None:
            tokens.append(_Token("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(_Token("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


def _syntax_error(message: str, pos: int) -> ParseError:
    return ParseError(ERR_SYNTAX, message, SourceSpan("<condition>", 1, pos + 1))


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.i = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.cur
        self.i += 1
        return tok

    def expect_op(self, text: str) -> None:
        if self.cur.kind != "op" or self.cur.text != text:
            raise _syntax_error(f"expected {text!r}", self.cur.pos)
        self.advance()

    def at_keyword(self, word: str) -> bool:
        return self.cur.kind == "ident" and self.cur.text == word

    def parse_expr(self) -> Expr:
        node = self.parse_and()
        while self.at_keyword("or"):
            self.advance()
            node = BoolOp("or", node, self.parse_and())
        return node

    def parse_and(self) -> Expr:
        node = self.parse_cmp()
        while self.at_keyword("and"):
            self.advance()
            node = BoolOp("and", node, self.parse_cmp())
        return node

    def parse_cmp(self) -> Expr:
        if self.at_keyword("not"):
            self.advance()
            return Not(self.parse_cmp())
        if self.at_keyword("taken"):
            self.advance()
            return Taken(self.parse_ref())
        if self.at_keyword("true"):
            self.advance()
            return BoolLit(True)
        if self.at_keyword("false"):
            self.advance()
            return BoolLit(False)
        lhs = self.parse_sum()
        if self.cur.kind == "op" and self.cur.text in CMP_OPS:
            op = self.advance().text
            return Cmp(op, lhs, self.parse_sum())
        return lhs

    def parse_sum(self) -> Expr:
        node = self.parse_term()
        while self.cur.kind == "op" and self.cur.text in ("+", "-"):
            op = self.advance().text
            node = Arith(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expr:
        node = self.parse_atom()
        while self.cur.kind == "op" and self.cur.text in ("*", "/"):
            op = self.advance().text
            node = Arith(op, node, self.parse_atom())
        return node

    def parse_atom(self) -> Expr:
        tok = self.cur
        if tok.kind == "int":
            self.advance()
            value = int(tok.text)
            if value > INT64_MAX:
                raise _syntax_error("integer literal out of 64-bit range", tok.pos)
            return IntLit(value)
        if self.at_keyword("now"):
            self.advance()
            return Now()
        if self.at_keyword("count"):
            self.advance()
            return Count(self.parse_ref())
        if self.at_keyword("time"):
            self.advance()
            return Time(self.parse_ref())
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise _syntax_error(f"expected a value, got {tok.text or 'end of input'!r}", tok.pos)

    def parse_ref(self) -> TransitionRef:
        self.expect_op("(")
        if self.cur.kind != "ident":
            raise _syntax_error("expected operation id", self.cur.pos)
        operation = self.advance().text
        self.expect_op(".")
        if self.cur.kind != "ident":
            raise _syntax_error("expected status label or target id", self.cur.pos)
        label = self.advance().text
        self.expect_op(")")
        return TransitionRef(operation, label)


def infer_type(expr: Expr) -> str:
    """Return ``"int"`` or ``"bool"``; raises ``ParseError(ERR_TYPE)`` if ill-typed."""
    if isinstance(expr, (IntLit, Count, Time, Now)):
        return "int"
    if isinstance(expr, (BoolLit, Taken)):
        return "bool"
    if isinstance(expr, Arith):
        if infer_type(expr.lhs) != "int" or infer_type(expr.rhs) != "int":
            raise ParseError(ERR_TYPE, f"arithmetic {expr.op!r} needs numeric operands")
        return "int"
    if isinstance(expr, Cmp):
        if infer_type(expr.lhs) != "int" or infer_type(expr.rhs) != "int":
            raise ParseError(ERR_TYPE, f"comparison {expr.op!r} needs numeric operands")
        return "bool"
    if isinstance(expr, BoolOp):
        if infer_type(expr.lhs) != "bool" or infer_type(expr.rhs) != "bool":
            raise ParseError(ERR_TYPE, f"{expr.op!r} needs boolean operands")
        return "bool"
    if isinstance(expr, Not):
        if infer_type(expr.expr) != "bool":
            raise ParseError(ERR_TYPE, "'not' needs a boolean operand")
        return "bool"
    raise TypeError(f"not a condition node: {expr!r}")


def parse_condition(text: str) -> Expr:
    """Parse and type-check one condition; the result is always boolean-typed."""
    parser = _Parser(_tokenize(text))
    expr = parser.parse_expr()
    if parser.cur.kind != "eof":
        raise _syntax_error(f"trailing input {parser.cur.text!r}", parser.cur.pos)
    if infer_type(expr) != "bool":
        raise ParseError(ERR_TYPE, "condition must be boolean")
    return expr


def refs_in(expr: Expr) -> list[TransitionRef]:
    """All transition references in the expression, left to right."""
    out: list[TransitionRef] = []

    def walk(node: Expr) -> None:
        if isinstance(node, (Count, Time, Taken)):
            out.append(node.ref)
        elif isinstance(node, (Arith, Cmp, BoolOp)):
            walk(node.lhs)
            walk(node.rhs)
        elif isinstance(node, Not):
            walk(node.expr)

    walk(expr)
    return out


def map_refs(expr: Expr, fn: Callable[[TransitionRef], TransitionRef]) -> Expr:
    """Structurally rebuild the expression with every ref passed through ``fn``."""
    if isinstance(expr, Count):
        return Count(fn(expr.ref))
    if isinstance(expr, Time):
        return Time(fn(expr.ref))
    if isinstance(expr, Taken):
        return Taken(fn(expr.ref))
    if isinstance(expr, Arith):
        return Arith(expr.op, map_refs(expr.lhs, fn), map_refs(expr.rhs, fn))
    if isinstance(expr, Cmp):
        return Cmp(expr.op, map_refs(expr.lhs, fn), map_refs(expr.rhs, fn))
    if isinstance(expr, BoolOp):
        return BoolOp(expr.op, map_refs(expr.lhs, fn), map_refs(expr.rhs, fn))
    if isinstance(expr, Not):
        return Not(map_refs(expr.expr, fn))
    return expr


# Printing precedence, loosest to tightest. "not" sits at comparison level.
_PREC = {"or": 1, "and": 2, "cmp": 3, "+": 4, "-": 4, "*": 5, "/": 5, "atom": 6}


def _prec(expr: Expr) -> int:
    if isinstance(expr, BoolOp):
        return _PREC[expr.op]
    if isinstance(expr, (Cmp, Not)):
        return _PREC["cmp"]
    if isinstance(expr, Arith):
        return _PREC[expr.op]
    return _PREC["atom"]


def to_text(expr: Expr) -> str:
    """Canonical concrete syntax; ``parse_condition(to_text(e)) == e``."""

    def render(node: Expr, parent_prec: int, right: bool = False) -> str:
        p = _prec(node)
        if isinstance(node, IntLit):
            s = str(node.value)
        elif isinstance(node, BoolLit):
            s = "true" if node.value else "false"
        elif isinstance(node, Now):
            s = "now"
        elif isinstance(node, Count):
            s = f"count({node.ref})"
        elif isinstance(node, Time):
            s = f"time({node.ref})"
        elif isinstance(node, Taken):
            s = f"taken({node.ref})"
        elif isinstance(node, Not):
            inner = node.expr
            body = render(inner, 0)
            if isinstance(inner, BoolOp):
                body = f"({body})"
            s = f"not {body}"
        elif isinstance(node, Cmp):
            s = f"{render(node.lhs, p)} {node.op} {render(node.rhs, p, right=True)}"
        elif isinstance(node, (Arith, BoolOp)):
            s = f"{render(node.lhs, p)} {node.op} {render(node.rhs, p, right=True)}"
        else:
            raise TypeError(f"not a condition node: {node!r}")
        # Left-associative chains: right children at equal precedence need parens.
        if p < parent_prec or (right and p == parent_prec and isinstance(node, (Arith, BoolOp, Cmp))):
            return f"({s})"
        return s

    return render(expr, 0)


def _checked(value: int, op: str) -> int:
    if not INT64_MIN <= value <= INT64_MAX:
        raise EvalError(ERR_OVERFLOW, f"64-bit overflow in {op!r}")
    return value


InfoLookup = Callable[[TransitionRef], object]


def evaluate(expr: Expr, info: InfoLookup | Mapping[TransitionRef, object], now: int) -> bool:
    """Evaluate a boolean condition against a transition-info view.

    ``info`` maps a ``TransitionRef`` to an object with ``count``, ``time``
    and ``taken`` attributes; a callable receives the ref and may raise
    ``LookupError`` for unknown refs.
    """
    lookup: InfoLookup
    if callable(info):
        lookup = info
    else:
        lookup = info.__getitem__

    def fetch(ref: TransitionRef) -> object:
        try:
            return lookup(ref)
        except LookupError:
            raise EvalError(ERR_UNRESOLVED_REF, f"no transition for {ref}") from None

    def ev(node: Expr) -> int | bool:
        if isinstance(node, IntLit):
            return node.value
        if isinstance(node, BoolLit):
            return node.value
        if isinstance(node, Now):
            return now
        if isinstance(node, Count):
            return fetch(node.ref).count  # type: ignore[attr-defined]
        if isinstance(node, Time):
            return fetch(node.ref).time  # type: ignore[attr-defined]
        if isinstance(node, Taken):
            return fetch(node.ref).taken  # type: ignore[attr-defined]
        if isinstance(node, Arith):
            a, b = ev(node.lhs), ev(node.rhs)
            if node.op == "+":
                return _checked(a + b, "+")
            if node.op == "-":
                return _checked(a - b, "-")
            if node.op == "*":
                return _checked(a * b, "*")
            if b == 0:
                raise EvalError(ERR_DIV_ZERO, "division by zero")
            q = abs(a) // abs(b)
            return _checked(q if (a < 0) == (b < 0) else -q, "/")
        if isinstance(node, Cmp):
            a, b = ev(node.lhs), ev(node.rhs)
            return {
                "<": a < b,
                "<=": a <= b,
                ">": a > b,
                ">=": a >= b,
                "==": a == b,
                "!=": a != b,
            }[node.op]
        if isinstance(node, BoolOp):
            if node.op == "and":
                return bool(ev(node.lhs)) and bool(ev(node.rhs))
            return bool(ev(node.lhs)) or bool(ev(node.rhs))
        if isinstance(node, Not):
            return not ev(node.expr)
        raise TypeError(f"not a condition node: {node!r}")

    return bool(ev(expr))
