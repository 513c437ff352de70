"""Scalar expressions over chart coordinates with exact Taylor evaluation.

Grammar (whitespace is ignored)::

    expr   = term { ("+" | "-") term }
    term   = unary { ("*" | "/") unary }
    unary  = ("-" | "+") unary | power
    power  = atom [ "^" ["-"] integer ]
    atom   = number | "x" integer | ("exp" | "log") "(" expr ")" | "(" expr ")"

Coordinates are written ``x1 .. x{2n}`` and map to zero-based indices.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .errors import DomainError
from .jets import jet_space

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)|(x\d+)|(exp|log)|(.))")


class ScalarField:
    """Immutable expression node.  Build with :func:`parse` or arithmetic."""

    __slots__ = ("op", "args", "value")

    def __init__(self, op, args=(), value=None):
        self.op = op
        self.args = tuple(args)
        self.value = value

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def const(c):
        return ScalarField("const", value=float(c))

    @staticmethod
    def var(i):
        return ScalarField("var", value=int(i))

    def _wrap(self, other):
        if isinstance(other, ScalarField):
            return other
        return ScalarField.const(other)

    def __add__(self, other):
        return ScalarField("add", (self, self._wrap(other)))

    def __radd__(self, other):
        return ScalarField("add", (self._wrap(other), self))

    def __sub__(self, other):
        return ScalarField("sub", (self, self._wrap(other)))

    def __rsub__(self, other):
        return ScalarField("sub", (self._wrap(other), self))

    def __mul__(self, other):
        return ScalarField("mul", (self, self._wrap(other)))

    def __rmul__(self, other):
        return ScalarField("mul", (self._wrap(other), self))

    def __truediv__(self, other):
        return ScalarField("div", (self, self._wrap(other)))

    def __rtruediv__(self, other):
        return ScalarField("div", (self._wrap(other), self))

    def __neg__(self):
        return ScalarField("neg", (self,))

    def __pos__(self):
        return self

    def __pow__(self, k):
        if int(k) != k:
            raise ValueError("only integer exponents are supported")
        return ScalarField("pow", (self,), int(k))

    # -- inspection -------------------------------------------------------------

    def variables(self):
        out = set()
        stack = [self]
        while stack:
            node = stack.pop()
            if node.op == "var":
                out.add(node.value)
            stack.extend(node.args)
        return out

    def __str__(self):
        op = self.op
        if op == "const":
            return repr(self.value) if self.value >= 0 else f"({self.value!r})"
        if op == "var":
            return f"x{self.value + 1}"
        if op in ("exp", "log"):
            return f"{op}({self.args[0]})"
        if op == "neg":
            return f"(-{self.args[0]})"
        if op == "pow":
            return f"({self.args[0]})^{self.value}" if self.value >= 0 else f"({self.args[0]})^-{-self.value}"
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
        return f"({self.args[0]} {sym} {self.args[1]})"

    def __repr__(self):
        return f"ScalarField({self})"

    # -- evaluation -------------------------------------------------------------

    def __call__(self, x):
        return float(self.jet(x, 0)[0])

    def jet(self, x, order):
        """Taylor coefficients at ``x`` up to ``order`` (see :mod:`cproj_lab.jets`)."""
        x = np.asarray(x, dtype=float)
        space = jet_space(len(x), order)
        return _evaluate(self, space, space.variables(x), {})


def _evaluate(node, space, xs, memo):
    key = id(node)
    hit = memo.get(key)
    if hit is not None:
        return hit
    op = node.op
    if op == "const":
        out = space.constant(node.value)
    elif op == "var":
        if node.value >= len(xs):
            raise DomainError(f"expression uses x{node.value + 1} beyond chart dimension {len(xs)}")
        out = xs[node.value]
    else:
        args = [_evaluate(a, space, xs, memo) for a in node.args]
        if op == "add":
            out = args[0] + args[1]
        elif op == "sub":
            out = args[0] - args[1]
        elif op == "neg":
            out = -args[0]
        elif op == "mul":
            out = space.mul(args[0], args[1])
        elif op == "div":
            if args[1][0] == 0:
                raise DomainError("division by zero")
            out = space.mul(args[0], space.reciprocal(args[1]))
        elif op == "pow":
            if node.value < 0 and args[0][0] == 0:
                raise DomainError("negative power of zero")
            out = space.ipow(args[0], node.value)
        elif op == "exp":
            out = space.exp(args[0])
        elif op == "log":
            if args[0][0] <= 0:
                raise DomainError("log of a non-positive value")
            out = space.log(args[0])
        else:
            raise ValueError(f"unknown node {op}")
    memo[key] = out
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                raise ValueError(f"cannot tokenize expression at column {pos + 1}: {text!r}")
            num, var, fn, other = m.groups()
            col = m.start(m.lastindex)
            if num is not None:
                self.tokens.append(("num", float(num), col))
            elif var is not None:
                self.tokens.append(("var", int(var[1:]) - 1, col))
            elif fn is not None:
                self.tokens.append(("fn", fn, col))
            else:
                if other not in "+-*/^()":
                    raise ValueError(f"unexpected character {other!r} at column {col + 1}")
                self.tokens.append(("sym", other, col))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, len(self.text))

    def take(self, sym=None):
        tok = self.peek()
        if sym is not None and (tok[0] != "sym" or tok[1] != sym):
            raise ValueError(f"expected {sym!r} at column {tok[2] + 1} in {self.text!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] is not None:
            raise ValueError(f"unexpected token {tok[1]!r} at column {tok[2] + 1} in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "sym" and self.peek()[1] in "+-":
            sym = self.take()[1]
            rhs = self.term()
            node = node + rhs if sym == "+" else node - rhs
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "sym" and self.peek()[1] in "*/":
            sym = self.take()[1]
            rhs = self.unary()
            node = node * rhs if sym == "*" else node / rhs
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "sym" and tok[1] in "+-":
            self.take()
            inner = self.unary()
            return -inner if tok[1] == "-" else inner
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "sym" and tok[1] == "^":
            self.take()
            sign = 1
            if self.peek()[0] == "sym" and self.peek()[1] == "-":
                self.take()
                sign = -1
            tok = self.take()
            if tok[0] != "num" or tok[1] != int(tok[1]):
                raise ValueError(f"exponent must be an integer at column {tok[2] + 1} in {self.text!r}")
            return base ** (sign * int(tok[1]))
        return base

    def atom(self):
        tok = self.take()
        kind, val, col = tok
        if kind == "num":
            return ScalarField.const(val)
        if kind == "var":
            if val < 0:
                raise ValueError(f"coordinate index must start at 1 (column {col + 1})")
            return ScalarField.var(val)
        if kind == "fn":
            self.take("(")
            arg = self.expr()
            self.take(")")
            return ScalarField(val, (arg,))
        if kind == "sym" and val == "(":
            node = self.expr()
            self.take(")")
            return node
        where = "end of input" if kind is None else f"column {col + 1}"
        raise ValueError(f"unexpected {val!r} at {where} in {self.text!r}")


def parse(text):
    """Parse an expression string into a :class:`ScalarField`."""
    return _Parser(text).parse()


def as_field(obj):
    if isinstance(obj, ScalarField):
        return obj
    if isinstance(obj, str):
        return parse(obj)
    if isinstance(obj, (int, float)):
        return ScalarField.const(obj)
    raise TypeError(f"cannot interpret {type(obj).__name__} as a scalar field")


def coords(n):
    """Coordinate fields ``(u1, v1, ..., un, vn)`` for complex dimension ``n``."""
    return [ScalarField.var(i) for i in range(2 * n)]


def abs2(n, offset=0):
    """The field ``|z|^2`` in the variables starting at ``offset``."""
    xs = [ScalarField.var(offset + i) for i in range(2 * n)]
    out = xs[0] * xs[0]
    for x in xs[1:]:
        out = out + x * x
    return out


def total(fields):
    out = None
    for f in fields:
        out = f if out is None else out + f
    return out if out is not None else ScalarField.const(0.0)


def eval_jet(f, x, order, chart=None):
    """Jet of ``f`` at ``x`` as a :class:`~cproj_lab.jets.JetPolynomial`."""
    from .jets import JetPolynomial

    if order > 6:
        raise ValueError("eval_jet supports orders up to 6")
    if chart is not None:
        chart.require(x)
    return JetPolynomial(x, order, as_field(f).jet(x, order))


def factorial_multi(mu):
    return math.prod(math.factorial(int(m)) for m in mu)


def shift_variables(f, offset):
    """Copy of ``f`` with every coordinate index moved up by ``offset``."""
    memo = {}

    def walk(node):
        hit = memo.get(id(node))
        if hit is not None:
            return hit
        if node.op == "var":
            out = ScalarField.var(node.value + offset)
        elif node.op == "const":
            out = node
        else:
            out = ScalarField(node.op, tuple(walk(a) for a in node.args), node.value)
        memo[id(node)] = out
        return out

    return walk(as_field(f))
