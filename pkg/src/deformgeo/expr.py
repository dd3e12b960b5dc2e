"""Minimal arithmetic expression language for declarative metric files.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

``^`` is right associative and binds tighter than unary minus on its left
(``-x^2 == -(x^2)``).  Expressions compile to closures over the coordinate
vector and are evaluated in double precision; feeding a seeded TaylorArray
yields exact first and second derivatives.
"""

from __future__ import annotations

import math
import re

from . import taylor as tj
from .errors import ExpressionError

FUNCTIONS = {
    "sin": tj.sin,
    "cos": tj.cos,
    "tan": tj.tan,
    "sinh": tj.sinh,
    "cosh": tj.cosh,
    "tanh": tj.tanh,
    "exp": tj.exp,
    "log": tj.log,
    "sqrt": tj.sqrt,
}
CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionError(f"cannot tokenize {text[pos:]!r}")
        num, name, op = m.groups()
        if num is not None:
            tokens.append(("num", num))
        elif name is not None:
            tokens.append(("name", name))
        elif op in "+-*/^()":
            tokens.append(("op", op))
        elif not op.isspace():
            raise ExpressionError(f"unexpected character {op!r} in {text!r}")
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            raise ExpressionError(f"expected {value or 'token'} in {self.text!r}")
        self.pos += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.pos != len(self.tokens):
            raise ExpressionError(f"trailing input in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            node = _binary(op, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.unary()
            node = _binary(op, node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            inner = self.unary()
            return lambda x: -inner(x)
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            exponent = self.unary()
            return _binary("^", base, exponent)
        return base

    def atom(self):
        kind, tok = self.take()
        if kind == "num":
            v = float(tok)
            return lambda x: v
        if kind == "name":
            if self.peek() == ("op", "("):
                if tok not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {tok!r}")
                self.take("(")
                arg = self.expr()
                self.take(")")
                fn = FUNCTIONS[tok]
                return lambda x: fn(arg(x))
            if tok in self.variables:
                i = self.variables[tok]
                return lambda x: x[i]
            if tok in CONSTANTS:
                v = CONSTANTS[tok]
                return lambda x: v
            raise ExpressionError(f"unknown name {tok!r} in {self.text!r}")
        if tok == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ExpressionError(f"unexpected {tok!r} in {self.text!r}")


def _binary(op, a, b):
    if op == "+":
        return lambda x: a(x) + b(x)
    if op == "-":
        return lambda x: a(x) - b(x)
    if op == "*":
        return lambda x: a(x) * b(x)
    if op == "/":
        return lambda x: a(x) / b(x)
    return lambda x: _pow(a(x), b(x))


def _pow(base, exponent):
    if isinstance(exponent, tj.TaylorArray):
        return base**exponent
    if isinstance(base, tj.TaylorArray):
        return base ** float(exponent)
    return float(base) ** float(exponent)


def compile_expression(text: str, variables=None):
    """Compile ``text`` into ``f(x)``; ``variables`` maps names to coordinate slots."""
    if not isinstance(text, str):
        raise ExpressionError(f"expression must be a string, got {text!r}")
    return _Parser(text, variables or {}).parse()


def default_variables(dim: int, names=None) -> dict[str, int]:
    out = {f"x{i}": i for i in range(dim)}
    for i, name in enumerate(names or ()):
        out[name] = i
    return out
