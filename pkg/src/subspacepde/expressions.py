"""Restricted expression grammar for problems defined in config files.

Supported: numeric literals, + - * / ^ (right-associative power), unary
sign, parentheses, the functions sin/cos/exp, and the variables x, y, t.
Expressions compile to evaluation trees applied to point arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]

FUNCTIONS: dict[str, Callable[[Array], Array]] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
}

VARIABLES = ("x", "y", "t")


class ExpressionError(ValueError):
    """Raised for syntax or name errors, with the offending position."""


@dataclass(frozen=True)
class _Token:
    kind: str  # number | name | op
    text: str
    pos: int


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    i = 0
    n = len(src)
    while i < n:
        ch = src[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < n and (src[j].isdigit() or src[j] == "."):
                j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            try:
                float(src[i:j])
            except ValueError:
                raise ExpressionError(f"bad number {src[i:j]!r} at position {i}") from None
            tokens.append(_Token("number", src[i:j], i))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(_Token("name", src[i:j], i))
            i = j
        elif ch in "+-*/^()":
            tokens.append(_Token("op", ch, i))
            i += 1
        else:
            raise ExpressionError(f"unexpected character {ch!r} at position {i}")
    return tokens


# Node = (tag, payload...) evaluated recursively; tags: num, var, call, neg, bin.


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise ExpressionError(f"unexpected end of expression in {self.src!r}")
        self.pos += 1
        return tok

    def expect_op(self, text: str) -> None:
        tok = self.take()
        if tok.kind != "op" or tok.text != text:
            raise ExpressionError(f"expected {text!r} at position {tok.pos}")

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExpressionError(f"trailing input at position {tok.pos}")
        return node

    def expr(self):
        node = self.term()
        while (tok := self.peek()) is not None and tok.kind == "op" and tok.text in "+-":
            self.take()
            rhs = self.term()
            node = ("bin", tok.text, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while (tok := self.peek()) is not None and tok.kind == "op" and tok.text in "*/":
            self.take()
            rhs = self.unary()
            node = ("bin", tok.text, node, rhs)
        return node

    def unary(self):
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text in "+-":
            self.take()
            node = self.unary()
            return ("neg", node) if tok.text == "-" else node
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text == "^":
            self.take()
            exponent = self.unary()  # right-associative, binds sign in the exponent
            return ("bin", "^", base, exponent)
        return base

    def atom(self):
        tok = self.take()
        if tok.kind == "number":
            return ("num", float(tok.text))
        if tok.kind == "name":
            nxt = self.peek()
            if nxt is not None and nxt.kind == "op" and nxt.text == "(":
                if tok.text not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {tok.text!r} at position {tok.pos}")
                self.take()
                arg = self.expr()
                self.expect_op(")")
                return ("call", tok.text, arg)
            if tok.text not in VARIABLES:
                raise ExpressionError(f"unknown variable {tok.text!r} at position {tok.pos}")
            return ("var", tok.text)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(f"unexpected token {tok.text!r} at position {tok.pos}")


def _evaluate(node, values: Mapping[str, Array]) -> Array:
    tag = node[0]
    if tag == "num":
        return np.float64(node[1])  # IEEE semantics for 0/0 etc., not ZeroDivisionError
    if tag == "var":
        name = node[1]
        if name not in values:
            raise ExpressionError(f"variable {name!r} is not defined on this domain")
        return values[name]
    if tag == "neg":
        return -_evaluate(node[1], values)
    if tag == "call":
        return FUNCTIONS[node[1]](_evaluate(node[2], values))
    op = node[1]
    lhs = _evaluate(node[2], values)
    rhs = _evaluate(node[3], values)
    if op == "+":
        return lhs + rhs
    if op == "-":
        return lhs - rhs
    if op == "*":
        return lhs * rhs
    if op == "/":
        return lhs / rhs
    return lhs**rhs


def compile_expression(src: str, variable_columns: Mapping[str, int]) -> Callable[[Array], Array]:
    """Parse once, return a vectorized point function.

    ``variable_columns`` maps allowed variable names to point-array columns;
    unknown variables fail at parse time when possible, otherwise at call
    time (a variable valid in the grammar but absent on this domain).
    """
    tree = _Parser(src).parse()

    def fn(points: Array) -> Array:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        values = {name: pts[:, col] for name, col in variable_columns.items()}
        out = _evaluate(tree, values)
        return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()

    return fn
