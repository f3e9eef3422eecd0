"""Tiny arithmetic expression DSL used for boundary data and curve definitions.

Grammar (recursive descent):

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' factor)?
    unary  := '-' unary | atom
    atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

``^`` is right-associative.  Known functions are unary; unknown identifiers
and arity mistakes are rejected at parse time with a byte offset.
"""

from __future__ import annotations

import math

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "tanh": np.tanh,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

CONSTANTS = {"pi": math.pi, "e": math.e}


class ExpressionError(ValueError):
    """Parse or evaluation failure, annotated with a byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos


def _tokenize(source):
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise ExpressionError(f"malformed number {text!r}", i) from None
            tokens.append(_Token("num", text, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], i))
            i = j
            continue
        if c in "+-*/^()":
            tokens.append(_Token(c, c, i))
            i += 1
            continue
        raise ExpressionError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Node:
    pass


class _Num(_Node):
    def __init__(self, value):
        self.value = value

    def eval(self, env):
        return self.value


class _Var(_Node):
    def __init__(self, name):
        self.name = name

    def eval(self, env):
        return env[self.name]


class _Unary(_Node):
    def __init__(self, child):
        self.child = child

    def eval(self, env):
        return -self.child.eval(env)


class _Bin(_Node):
    def __init__(self, op, left, right):
        self.op = op
        self.left = left
        self.right = right

    def eval(self, env):
        a = self.left.eval(env)
        b = self.right.eval(env)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.op == "+":
                return a + b
            if self.op == "-":
                return a - b
            if self.op == "*":
                return a * b
            if self.op == "/":
                return a / b
            return np.power(a, b)


class _Call(_Node):
    def __init__(self, fn, child):
        self.fn = fn
        self.child = child

    def eval(self, env):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return self.fn(self.child.eval(env))


class _Parser:
    def __init__(self, tokens, variables):
        self.tokens = tokens
        self.pos = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.take()
        if tok.kind != kind:
            raise ExpressionError(f"expected {kind!r}, found {tok.text!r}", tok.pos)
        return tok

    def parse_expr(self):
        node = self.parse_term()
        while self.peek().kind in ("+", "-"):
            op = self.take().kind
            node = _Bin(op, node, self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_factor()
        while self.peek().kind in ("*", "/"):
            op = self.take().kind
            node = _Bin(op, node, self.parse_factor())
        return node

    def parse_factor(self):
        node = self.parse_unary()
        if self.peek().kind == "^":
            self.take()
            node = _Bin("^", node, self.parse_factor())
        return node

    def parse_unary(self):
        if self.peek().kind == "-":
            self.take()
            return _Unary(self.parse_unary())
        return self.parse_atom()

    def parse_atom(self):
        tok = self.take()
        if tok.kind == "num":
            return _Num(float(tok.text))
        if tok.kind == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            if self.peek().kind == "(":
                if tok.text not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {tok.text!r}", tok.pos)
                self.take()
                arg = self.parse_expr()
                self.expect(")")
                return _Call(FUNCTIONS[tok.text], arg)
            if tok.text in CONSTANTS:
                return _Num(CONSTANTS[tok.text])
            if tok.text not in self.variables:
                raise ExpressionError(f"unknown identifier {tok.text!r}", tok.pos)
            return _Var(tok.text)
        raise ExpressionError(f"unexpected token {tok.text!r}", tok.pos)


class ExpressionFn:
    """A compiled expression over a fixed set of variable names.

    Evaluation is vectorized: each variable may be a scalar or an ndarray,
    and IEEE double semantics apply throughout.
    """

    def __init__(self, source, variables):
        self.source = source
        self.variables = tuple(variables)
        tokens = _tokenize(source)
        parser = _Parser(tokens, frozenset(self.variables))
        self._root = parser.parse_expr()
        trailing = parser.peek()
        if trailing.kind != "end":
            raise ExpressionError(f"trailing input {trailing.text!r}", trailing.pos)

    def __call__(self, **kwargs):
        env = {}
        for name in self.variables:
            if name not in kwargs:
                raise KeyError(f"missing variable {name!r} for {self.source!r}")
            value = kwargs[name]
            # promote to numpy scalars/arrays for IEEE semantics (no
            # ZeroDivisionError on python floats)
            env[name] = (np.float64(value) if np.isscalar(value)
                         else np.asarray(value, dtype=float))
        return self._root.eval(env)

    def __repr__(self):
        return f"ExpressionFn({self.source!r}, variables={self.variables})"


def parse_expression(source, variables=("x1", "x2", "z1", "z2")):
    """Compile ``source`` into an :class:`ExpressionFn`."""
    return ExpressionFn(source, variables)
