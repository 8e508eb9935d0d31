"""Tiny arithmetic expression grammar for curvature and boundary fields.

Grammar (EBNF, also in docs/expression-grammar.md):

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = { "+" | "-" } primary ;
    primary = NUMBER | NAME | NAME "(" expr ")" | "(" expr ")" ;
    NAME    = letter { letter | digit | "_" } ;
    NUMBER  = decimal literal (e.g. 1, 0.5, 2e-3) ;

Allowed functions: sin, cos, tanh, cosh, exp.  Other NAMEs must be
coordinate names of the active chart.  No exponentiation, no embedded
scripting: this deliberately covers exactly the curvature and data fields
in scope.
"""

from __future__ import annotations

import re

import numpy as np

__all__ = ["ExpressionError", "Expression", "parse_expression"]

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "cosh": np.cosh,
    "exp": np.exp,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[+\-*/()]))"
)


class ExpressionError(ValueError):
    pass


def _tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExpressionError(f"bad character at position {pos}: {text[pos:]!r}")
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num")), pos))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), pos))
        else:
            tokens.append(("op", m.group("op"), pos))
        pos = m.end()
    tokens.append(("end", None, pos))
    return tokens


class _Parser:
    def __init__(self, tokens, names):
        self.tokens = tokens
        self.i = 0
        self.names = names

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect_op(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r} at position {pos}")

    def parse(self):
        node = self.expr()
        kind, _, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected trailing input at position {pos}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            _, op, _ = self.take()
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            _, op, _ = self.take()
            node = (op, node, self.unary())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            inner = self.unary()
            return inner if val == "+" else ("neg", inner)
        return self.primary()

    def primary(self):
        kind, val, pos = self.take()
        if kind == "num":
            return ("const", val)
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if val not in FUNCTIONS:
                    raise ExpressionError(
                        f"unknown function {val!r} at position {pos} "
                        f"(allowed: {sorted(FUNCTIONS)})"
                    )
                self.take()
                arg = self.expr()
                self.expect_op(")")
                return ("call", val, arg)
            if val not in self.names:
                raise ExpressionError(
                    f"unknown name {val!r} at position {pos} "
                    f"(coordinates: {sorted(self.names)})"
                )
            return ("var", val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(f"unexpected token at position {pos}")


def _evaluate(node, env):
    op = node[0]
    if op == "const":
        return node[1]
    if op == "var":
        return env[node[1]]
    if op == "neg":
        return -_evaluate(node[1], env)
    if op == "call":
        return FUNCTIONS[node[1]](_evaluate(node[2], env))
    a = _evaluate(node[1], env)
    b = _evaluate(node[2], env)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    raise AssertionError(f"bad node {node!r}")


class Expression:
    """Parsed expression over named coordinates."""

    def __init__(self, text, names):
        self.text = text
        self.names = tuple(names)
        self._ast = _Parser(_tokenize(text), set(names)).parse()

    def __call__(self, **env):
        return _evaluate(self._ast, env)

    def on_points(self, pts):
        """Evaluate on points shaped (..., n); names map to components."""
        pts = np.asarray(pts, dtype=float)
        env = {name: pts[..., a] for a, name in enumerate(self.names)}
        out = _evaluate(self._ast, env)
        return np.broadcast_to(np.asarray(out, dtype=float), pts.shape[:-1]).copy()


def parse_expression(text: str, names) -> Expression:
    return Expression(text, names)
