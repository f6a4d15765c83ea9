"""Expression DAGs for dynamics update functions, plus the infix parser.

The node set is deliberately small: ring operations, constant scaling, and
the four smooth one-dimensional primitives (sin, cos, tanh, exp) that the
bound propagation backend knows how to enclose. Division is excluded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "Expr",
    "Constant",
    "StateVar",
    "ControlVar",
    "Sum",
    "Difference",
    "Product",
    "Scale",
    "Unary",
    "PRIMITIVES",
    "ExprError",
    "parse_expression",
    "expr_to_string",
    "validate_expr",
    "eval_expr",
]

PRIMITIVES = {
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "exp": np.exp,
}


class Expr:
    """Base class for expression DAG nodes. Nodes are immutable."""

    __slots__ = ()


@dataclass(frozen=True)
class Constant(Expr):
    value: float


@dataclass(frozen=True)
class StateVar(Expr):
    index: int


@dataclass(frozen=True)
class ControlVar(Expr):
    index: int


@dataclass(frozen=True)
class Sum(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Difference(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Product(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Scale(Expr):
    factor: float
    arg: Expr


@dataclass(frozen=True)
class Unary(Expr):
    fn: str
    arg: Expr

    def __post_init__(self) -> None:
        if self.fn not in PRIMITIVES:
            raise ValueError(f"unknown primitive {self.fn!r}")


class ExprError(ValueError):
    """Expression syntax or validation error with a source position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at column {position})")
        self.position = position


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[+\-*(),]))"
)

_VAR_RE = re.compile(r"^([xu])(\d+)$")


@dataclass(frozen=True)
class _Token:
    kind: str  # "num" | "ident" | "op" | "end"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_pos = len(text) - len(stripped)
            raise ExprError(f"unexpected character {stripped[0]!r}", bad_pos)
        for kind in ("num", "ident", "op"):
            val = m.group(kind)
            if val is not None:
                tokens.append(_Token(kind, val, m.start(kind)))
                break
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive-descent parser: ``*`` over ``+ -``, left-associative."""

    def __init__(self, text: str, state_dim: int, control_dim: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.state_dim = state_dim
        self.control_dim = control_dim

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> _Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            raise ExprError(f"expected {op!r}, found {tok.text or 'end of input'!r}",
                            tok.pos)
        return self.advance()

    def parse(self) -> Expr:
        expr = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprError(f"unexpected trailing input {tok.text!r}", tok.pos)
        return expr

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.term()
            node = _fold_sum(node, rhs) if op == "+" else _fold_diff(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek().kind == "op" and self.peek().text == "*":
            self.advance()
            node = _fold_product(node, self.factor())
        return node

    def factor(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return _fold_product(Constant(-1.0), self.factor())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.advance()
        if tok.kind == "num":
            return Constant(float(tok.text))
        if tok.kind == "ident":
            if self.peek().kind == "op" and self.peek().text == "(":
                if tok.text not in PRIMITIVES:
                    raise ExprError(f"unknown primitive {tok.text!r}", tok.pos)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Unary(tok.text, arg)
            return self.variable(tok)
        if tok.kind == "op" and tok.text == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ExprError(f"unexpected {tok.text or 'end of input'!r}", tok.pos)

    def variable(self, tok: _Token) -> Expr:
        m = _VAR_RE.match(tok.text)
        if m is None:
            raise ExprError(f"unknown identifier {tok.text!r}", tok.pos)
        kind, idx = m.group(1), int(m.group(2))
        if kind == "x":
            if idx >= self.state_dim:
                raise ExprError(
                    f"state variable x{idx} out of range (state_dim={self.state_dim})",
                    tok.pos)
            return StateVar(idx)
        if idx >= self.control_dim:
            raise ExprError(
                f"control variable u{idx} out of range (control_dim={self.control_dim})",
                tok.pos)
        return ControlVar(idx)


def _fold_sum(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Constant) and isinstance(b, Constant):
        return Constant(a.value + b.value)
    return Sum(a, b)


def _fold_diff(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Constant) and isinstance(b, Constant):
        return Constant(a.value - b.value)
    return Difference(a, b)


def _fold_product(a: Expr, b: Expr) -> Expr:
    # constant * expr lowers to Scale so the bounders see an exact linear op
    if isinstance(a, Constant) and isinstance(b, Constant):
        return Constant(a.value * b.value)
    if isinstance(a, Constant):
        return Scale(a.value, b)
    if isinstance(b, Constant):
        return Scale(b.value, a)
    return Product(a, b)


def parse_expression(text: str, state_dim: int, control_dim: int) -> Expr:
    """Parse an infix expression over ``x0..x{d-1}``, ``u0..u{m-1}``."""
    return _Parser(text, state_dim, control_dim).parse()


def _fmt(value: float) -> str:
    s = repr(float(value))
    return f"({s})" if value < 0 else s


def expr_to_string(expr: Expr) -> str:
    """Render a parseable infix string; round-trips through parse_expression."""

    def render(e: Expr, parent_prec: int) -> str:
        if isinstance(e, Constant):
            return _fmt(e.value)
        if isinstance(e, StateVar):
            return f"x{e.index}"
        if isinstance(e, ControlVar):
            return f"u{e.index}"
        if isinstance(e, Unary):
            return f"{e.fn}({render(e.arg, 0)})"
        if isinstance(e, (Sum, Difference)):
            op = "+" if isinstance(e, Sum) else "-"
            left = render(e.left, 1)
            # parenthesize additive right operands to keep the tree left-associative
            right = render(e.right, 2)
            body = f"{left} {op} {right}"
            return f"({body})" if parent_prec > 1 else body
        if isinstance(e, Scale):
            body = f"{_fmt(e.factor)} * {render(e.arg, 3)}"
            return f"({body})" if parent_prec > 2 else body
        if isinstance(e, Product):
            body = f"{render(e.left, 2)} * {render(e.right, 3)}"
            return f"({body})" if parent_prec > 2 else body
        raise TypeError(f"unknown expression node {type(e).__name__}")

    return render(expr, 0)


def validate_expr(expr: Expr, state_dim: int, control_dim: int) -> None:
    """Check that all variable indices fit the declared dimensions."""
    seen: set[int] = set()

    def walk(e: Expr) -> None:
        if id(e) in seen:
            return
        seen.add(id(e))
        if isinstance(e, StateVar):
            if not 0 <= e.index < state_dim:
                raise ValueError(f"state variable x{e.index} out of range "
                                 f"(state_dim={state_dim})")
        elif isinstance(e, ControlVar):
            if not 0 <= e.index < control_dim:
                raise ValueError(f"control variable u{e.index} out of range "
                                 f"(control_dim={control_dim})")
        elif isinstance(e, (Sum, Difference, Product)):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, (Scale, Unary)):
            walk(e.arg)
        elif not isinstance(e, Constant):
            raise TypeError(f"unknown expression node {type(e).__name__}")

    walk(expr)


def eval_expr(expr: Expr, x: np.ndarray, u: Optional[np.ndarray] = None) -> np.ndarray:
    """Evaluate over a batch: ``x`` is (N, d), ``u`` is (N, m); returns (N,).

    Evaluation is deterministic: equal inputs give bit-identical outputs.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    cache: dict[int, np.ndarray] = {}

    def ev(e: Expr) -> np.ndarray:
        hit = cache.get(id(e))
        if hit is not None:
            return hit
        if isinstance(e, Constant):
            out = np.full(n, e.value)
        elif isinstance(e, StateVar):
            out = x[:, e.index]
        elif isinstance(e, ControlVar):
            if u is None:
                raise ValueError("expression uses control variables but no u given")
            out = u[:, e.index]
        elif isinstance(e, Sum):
            out = ev(e.left) + ev(e.right)
        elif isinstance(e, Difference):
            out = ev(e.left) - ev(e.right)
        elif isinstance(e, Product):
            out = ev(e.left) * ev(e.right)
        elif isinstance(e, Scale):
            out = e.factor * ev(e.arg)
        elif isinstance(e, Unary):
            out = PRIMITIVES[e.fn](ev(e.arg))
        else:
            raise TypeError(f"unknown expression node {type(e).__name__}")
        cache[id(e)] = out
        return out

    return ev(expr)
