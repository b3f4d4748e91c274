"""Recursive-descent parser for conformal-factor expressions.

Grammar (standard precedence, ``^`` is right associative and binds tighter
than unary minus, so ``-x^2 == -(x^2)``)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := ("+" | "-") unary | power
    power := atom ("^" unary)?
    atom  := NUMBER | VAR | FUNC "(" expr ")" | "(" expr ")"

Parsed expressions compile to closures over numpy ufuncs, so they evaluate
elementwise on arrays of chart coordinates.
"""
import re

import numpy as np

from .errors import ParseError

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}
VARIABLES = ("x", "y", "z")

_TOKEN = re.compile(r"(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(.))")


def _tokenize(text):
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        m = _TOKEN.match(text, pos)
        start = m.start(m.lastindex)
        if m.group(1) is not None:
            tokens.append(("num", m.group(1), start))
        elif m.group(2) is not None:
            tokens.append(("name", m.group(2), start))
        else:
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise ParseError(f"unexpected character {ch!r} at offset {start}", text, start, "token")
            tokens.append(("op", ch, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.variables = variables
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, expected):
        kind, value, pos = self.tok
        found = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"expected {expected} at offset {pos}, found {found}", self.text, pos, expected)

    def accept(self, op):
        if self.tok[0] == "op" and self.tok[1] == op:
            self.i += 1
            return True
        return False

    def expect(self, op):
        if not self.accept(op):
            self.error(repr(op))

    def parse(self):
        node = self.expr()
        if self.tok[0] != "end":
            self.error("operator or end of input")
        return node

    def expr(self):
        node = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.tok[1]
            self.i += 1
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.tok[1]
            self.i += 1
            node = (op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            return ("neg", self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            return ("^", base, self.unary())
        return base

    def atom(self):
        kind, value, pos = self.tok
        if kind == "num":
            self.i += 1
            return ("num", float(value))
        if kind == "name":
            self.i += 1
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("call", value, arg)
            if value in self.variables:
                return ("var", value)
            raise ParseError(f"unknown name {value!r} at offset {pos}", self.text, pos, "variable or function")
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.error("number, variable, function or '('")


def _compile(node):
    tag = node[0]
    if tag == "num":
        c = node[1]
        return lambda env: c
    if tag == "var":
        name = node[1]
        return lambda env: env[name]
    if tag == "neg":
        f = _compile(node[1])
        return lambda env: -f(env)
    if tag == "call":
        fn = FUNCTIONS[node[1]]
        f = _compile(node[2])
        return lambda env: fn(f(env))
    a, b = _compile(node[1]), _compile(node[2])
    if tag == "+":
        return lambda env: a(env) + b(env)
    if tag == "-":
        return lambda env: a(env) - b(env)
    if tag == "*":
        return lambda env: a(env) * b(env)
    if tag == "/":
        return lambda env: a(env) / b(env)
    return lambda env: np.power(a(env), b(env))


class Expression:
    """A parsed scalar expression in the chart variables x, y (and z)."""

    def __init__(self, text, dimension=2):
        if dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        self.text = text
        self.dimension = dimension
        self.variables = VARIABLES[:dimension]
        self.tree = _Parser(text, self.variables).parse()
        self._fn = _compile(self.tree)

    def __call__(self, coords):
        """Evaluate at ``coords`` of shape ``(..., dimension)``."""
        coords = np.asarray(coords, dtype=float)
        env = {v: coords[..., k] for k, v in enumerate(self.variables)}
        out = self._fn(env)
        return np.broadcast_to(np.asarray(out, dtype=float), coords.shape[:-1]) + 0.0

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse(text, dimension=2):
    return Expression(text, dimension)
