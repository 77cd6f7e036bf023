"""Small arithmetic expression language for drift/cost declarations.

Grammar (whitespace insignificant, ASCII only)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?          # right-associative, binds tighter
    atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

Variables are t, x1, x2; functions are sin, cos, exp, log, abs, tanh, sqrt.
Evaluation is plain IEEE double arithmetic and accepts numpy arrays, with
domain violations and non-finite results reported as `EvalError` rather
than propagated silently.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import EvalError, ExpressionError, UnknownIdentifierError

VARIABLES = ("t", "x1", "x2")

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "abs": np.abs,
    "tanh": np.tanh,
    "sqrt": np.sqrt,
}


class Expr:
    """Immutable expression tree; nodes implement eval/children/to_text."""

    def eval(self, t, x1, x2):
        with np.errstate(all="ignore"):
            out = self._ev(t, x1, x2)
        if not np.all(np.isfinite(out)):
            raise EvalError(f"non-finite result while evaluating '{self}'")
        return out

    def _ev(self, t, x1, x2):  # pragma: no cover - subclasses override
        raise NotImplementedError

    @property
    def uses_t(self) -> bool:
        return any(c.uses_t for c in self._children())

    def _children(self):
        return ()

    def __str__(self):
        return self.to_text()

    def to_text(self) -> str:  # pragma: no cover - subclasses override
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def _ev(self, t, x1, x2):
        return self.value

    def to_text(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def _ev(self, t, x1, x2):
        return {"t": t, "x1": x1, "x2": x2}[self.name]

    @property
    def uses_t(self):
        return self.name == "t"

    def to_text(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def _ev(self, t, x1, x2):
        return -self.arg._ev(t, x1, x2)

    def _children(self):
        return (self.arg,)

    def to_text(self):
        return f"(-{self.arg.to_text()})"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def _ev(self, t, x1, x2):
        a = self.left._ev(t, x1, x2)
        b = self.right._ev(t, x1, x2)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            if np.any(b == 0):
                raise EvalError(f"division by zero in '{self}'")
            return a / b
        if np.any((np.asarray(a) < 0) & (np.mod(b, 1) != 0)):
            raise EvalError(f"negative base with non-integer exponent in '{self}'")
        return np.power(a, b)

    def _children(self):
        return (self.left, self.right)

    def to_text(self):
        return f"({self.left.to_text()} {self.op} {self.right.to_text()})"


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr

    def _ev(self, t, x1, x2):
        v = self.arg._ev(t, x1, x2)
        if self.fn == "log" and np.any(np.asarray(v) <= 0):
            raise EvalError(f"log of non-positive argument in '{self}'")
        if self.fn == "sqrt" and np.any(np.asarray(v) < 0):
            raise EvalError(f"sqrt of negative argument in '{self}'")
        return FUNCTIONS[self.fn](v)

    def _children(self):
        return (self.arg,)

    def to_text(self):
        return f"{self.fn}({self.arg.to_text()})"


_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


class _Parser:
    def __init__(self, text: str):
        if not text.isascii():
            raise ExpressionError("expression must be ASCII", 0)
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r\n":
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            raise ExpressionError(f"expected '{ch}'", self.pos)
        self.pos += 1

    def parse(self) -> Expr:
        e = self.expr()
        self.skip_ws()
        if self.pos != len(self.text):
            raise ExpressionError(f"unexpected character {self.text[self.pos]!r}", self.pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek() in ("*", "/"):
            op = self.text[self.pos]
            self.pos += 1
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.peek() == "-":
            self.pos += 1
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        e = self.atom()
        if self.peek() == "^":
            self.pos += 1
            e = BinOp("^", e, self.unary())
        return e

    def atom(self) -> Expr:
        c = self.peek()
        if c == "(":
            self.pos += 1
            e = self.expr()
            self.expect(")")
            return e
        if c.isdigit() or c == ".":
            m = _NUMBER.match(self.text, self.pos)
            if m is None:
                raise ExpressionError("malformed number", self.pos)
            self.pos = m.end()
            return Num(float(m.group()))
        m = _IDENT.match(self.text, self.pos)
        if m is None:
            if c == "":
                raise ExpressionError("unexpected end of input", self.pos)
            raise ExpressionError(f"unexpected character {c!r}", self.pos)
        name = m.group()
        start = self.pos
        self.pos = m.end()
        if self.peek() == "(":
            if name not in FUNCTIONS:
                raise UnknownIdentifierError(name, start)
            self.pos += 1
            arg = self.expr()
            self.expect(")")
            return Call(name, arg)
        if name not in VARIABLES:
            raise UnknownIdentifierError(name, start)
        return Var(name)


def parse(text: str) -> Expr:
    return _Parser(text).parse()


def evaluate_on_grid(e: Expr, t: float, grid) -> np.ndarray:
    """Evaluate over all grid nodes, returning a full (nx, ny) array."""
    x1, x2 = grid.mesh()
    out = e.eval(t, x1, x2)
    return np.broadcast_to(np.asarray(out, dtype=np.float64), grid.shape).copy()
