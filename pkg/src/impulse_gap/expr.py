"""Scalar expressions over a state vector ``x1..xn`` and the time symbol ``t``.

Grammar (highest precedence first, left-associative within a level)::

    primary := NUMBER | x<k> | t | FUNC "(" expr ")" | "(" expr ")"
    power   := primary ("^" INTEGER)*
    unary   := "-" unary | power
    term    := unary (("*" | "/") unary)*
    expr    := term (("+" | "-") term)*

with ``FUNC`` one of ``sin cos exp sqrt``. Exponents must be non-negative
integer literals, which keeps every expression smooth on its domain.

Expressions are immutable trees. They can be evaluated directly, differentiated
symbolically, printed in a fully parenthesized form that parses back to the
same function, and compiled to Python callables (scalar or numpy-vectorized)
for the integrators.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import InputError, NumericalError

TIME = "t"
Variable = Union[int, str]

FUNCTIONS = ("sin", "cos", "exp", "sqrt")


class ParseError(InputError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownSymbol(InputError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown symbol {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class DomainError(NumericalError):
    pass


# Overflow-safe primitives shared by tree evaluation and compiled code.

def _exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


def _pow(a, k):
    try:
        return a**k
    except OverflowError:
        return math.copysign(math.inf, a) if k % 2 else math.inf


def _div(a, b):
    if b == 0.0:
        raise DomainError("division by zero")
    return a / b


def _sqrt(a):
    if a < 0.0:
        raise DomainError(f"sqrt of negative value {a!r}")
    return math.sqrt(a)


def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        text = str(int(v))
    else:
        text = repr(float(v))
    return f"({text})" if v < 0 else text


class Expression:
    """Base class of the expression tree."""

    def evaluate(self, point: Sequence[float], time: float = 0.0) -> float:
        raise NotImplementedError

    def diff(self, var: Variable) -> Expression:
        raise NotImplementedError

    def _src(self) -> str:
        raise NotImplementedError

    def children(self) -> tuple[Expression, ...]:
        return ()

    def variables(self) -> set[Variable]:
        out: set[Variable] = set()
        stack: list[Expression] = [self]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                out.add(node.index)
            elif isinstance(node, Time):
                out.add(TIME)
            stack.extend(node.children())
        return out

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children())

    def compile(self) -> Callable[[Sequence[float], float], float]:
        """Scalar callable ``f(x, t)``; raises DomainError like :meth:`evaluate`."""
        return _compile_scalar([self], single=True)

    def __repr__(self) -> str:
        return str(self)


@dataclass(frozen=True, repr=False)
class Const(Expression):
    value: float

    def evaluate(self, point, time=0.0):
        return float(self.value)

    def diff(self, var):
        return ZERO

    def _src(self):
        return repr(float(self.value))

    def __str__(self):
        return _fmt_number(self.value)


@dataclass(frozen=True, repr=False)
class Var(Expression):
    index: int

    def evaluate(self, point, time=0.0):
        return float(point[self.index])

    def diff(self, var):
        return ONE if var == self.index else ZERO

    def _src(self):
        return f"x[{self.index}]"

    def __str__(self):
        return f"x{self.index + 1}"


@dataclass(frozen=True, repr=False)
class Time(Expression):
    def evaluate(self, point, time=0.0):
        return float(time)

    def diff(self, var):
        return ONE if var == TIME else ZERO

    def _src(self):
        return "t"

    def __str__(self):
        return "t"


@dataclass(frozen=True, repr=False)
class Neg(Expression):
    arg: Expression

    def children(self):
        return (self.arg,)

    def evaluate(self, point, time=0.0):
        return -self.arg.evaluate(point, time)

    def diff(self, var):
        return neg(self.arg.diff(var))

    def _src(self):
        return f"(-{self.arg._src()})"

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True, repr=False)
class _Unary(Expression):
    arg: Expression

    name = ""

    def children(self):
        return (self.arg,)

    def _src(self):
        return f"_{self.name}({self.arg._src()})"

    def __str__(self):
        return f"{self.name}({self.arg})"


class Sin(_Unary):
    name = "sin"

    def evaluate(self, point, time=0.0):
        return math.sin(self.arg.evaluate(point, time))

    def diff(self, var):
        return mul(Cos(self.arg), self.arg.diff(var))


class Cos(_Unary):
    name = "cos"

    def evaluate(self, point, time=0.0):
        return math.cos(self.arg.evaluate(point, time))

    def diff(self, var):
        return neg(mul(Sin(self.arg), self.arg.diff(var)))


class Exp(_Unary):
    name = "exp"

    def evaluate(self, point, time=0.0):
        return _exp(self.arg.evaluate(point, time))

    def diff(self, var):
        return mul(Exp(self.arg), self.arg.diff(var))


class Sqrt(_Unary):
    name = "sqrt"

    def evaluate(self, point, time=0.0):
        return _sqrt(self.arg.evaluate(point, time))

    def diff(self, var):
        return div(self.arg.diff(var), mul(Const(2.0), Sqrt(self.arg)))


@dataclass(frozen=True, repr=False)
class _Binary(Expression):
    left: Expression
    right: Expression

    symbol = ""

    def children(self):
        return (self.left, self.right)

    def _src(self):
        return f"({self.left._src()} {self.symbol} {self.right._src()})"

    def __str__(self):
        return f"({self.left} {self.symbol} {self.right})"


class Add(_Binary):
    symbol = "+"

    def evaluate(self, point, time=0.0):
        return self.left.evaluate(point, time) + self.right.evaluate(point, time)

    def diff(self, var):
        return add(self.left.diff(var), self.right.diff(var))


class Sub(_Binary):
    symbol = "-"

    def evaluate(self, point, time=0.0):
        return self.left.evaluate(point, time) - self.right.evaluate(point, time)

    def diff(self, var):
        return sub(self.left.diff(var), self.right.diff(var))


class Mul(_Binary):
    symbol = "*"

    def evaluate(self, point, time=0.0):
        return self.left.evaluate(point, time) * self.right.evaluate(point, time)

    def diff(self, var):
        return add(mul(self.left.diff(var), self.right), mul(self.left, self.right.diff(var)))


class Div(_Binary):
    symbol = "/"

    def evaluate(self, point, time=0.0):
        return _div(self.left.evaluate(point, time), self.right.evaluate(point, time))

    def diff(self, var):
        num = sub(mul(self.left.diff(var), self.right), mul(self.left, self.right.diff(var)))
        return div(num, power(self.right, 2))

    def _src(self):
        return f"_div({self.left._src()}, {self.right._src()})"


@dataclass(frozen=True, repr=False)
class Pow(Expression):
    base: Expression
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or self.exponent < 0:
            raise InputError(f"exponent must be a non-negative integer, got {self.exponent!r}")

    def children(self):
        return (self.base,)

    def evaluate(self, point, time=0.0):
        return _pow(self.base.evaluate(point, time), self.exponent)

    def diff(self, var):
        if self.exponent == 0:
            return ZERO
        outer = mul(Const(float(self.exponent)), power(self.base, self.exponent - 1))
        return mul(outer, self.base.diff(var))

    def _src(self):
        return f"_pow({self.base._src()}, {self.exponent})"

    def __str__(self):
        return f"({self.base} ^ {self.exponent})"


ZERO = Const(0.0)
ONE = Const(1.0)


# Smart constructors: fold literal zeros/ones and constant subtrees.

def _is(e: Expression, v: float) -> bool:
    return isinstance(e, Const) and e.value == v


def neg(a: Expression) -> Expression:
    if isinstance(a, Const):
        return Const(-a.value) if a.value != 0 else ZERO
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expression, b: Expression) -> Expression:
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Sub(a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Mul(a, b)


def div(a: Expression, b: Expression) -> Expression:
    if _is(b, 1):
        return a
    if _is(a, 0) and not _is(b, 0):
        return ZERO
    return Div(a, b)


def power(a: Expression, k: int) -> Expression:
    if k == 0:
        return ONE
    if k == 1:
        return a
    if isinstance(a, Const):
        return Const(_pow(a.value, k))
    return Pow(a, k)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)
_STATE_VAR = re.compile(r"x([1-9][0-9]*)")


@dataclass
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    raw = text.encode("utf-8")
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", len(text[:pos].encode("utf-8")))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(_Token(kind, m.group(kind), len(text[:start].encode("utf-8"))))
        pos = m.end()
    tokens.append(_Token("eof", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _accept_op(self, *ops: str) -> str | None:
        if self.tok.kind == "op" and self.tok.text in ops:
            self.i += 1
            return self.tokens[self.i - 1].text
        return None

    def _expect_op(self, op: str) -> None:
        if self._accept_op(op) is None:
            found = "end of input" if self.tok.kind == "eof" else repr(self.tok.text)
            raise ParseError(f"expected {op!r}, found {found}", self.tok.offset)

    def parse(self) -> Expression:
        e = self.expr()
        if self.tok.kind != "eof":
            raise ParseError(f"unexpected token {self.tok.text!r}", self.tok.offset)
        return e

    def expr(self) -> Expression:
        e = self.term()
        while (op := self._accept_op("+", "-")) is not None:
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expression:
        e = self.unary()
        while (op := self._accept_op("*", "/")) is not None:
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self) -> Expression:
        if self._accept_op("-") is not None:
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expression:
        e = self.primary()
        while self._accept_op("^") is not None:
            tok = self.tok
            if tok.kind != "num" or not tok.text.isdigit():
                raise ParseError("exponent must be a non-negative integer literal", tok.offset)
            self.i += 1
            e = Pow(e, int(tok.text))
        return e

    def primary(self) -> Expression:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            if tok.text in FUNCTIONS:
                self._expect_op("(")
                arg = self.expr()
                self._expect_op(")")
                return {"sin": Sin, "cos": Cos, "exp": Exp, "sqrt": Sqrt}[tok.text](arg)
            if tok.text == TIME:
                return Time()
            m = _STATE_VAR.fullmatch(tok.text)
            if m and int(m.group(1)) <= self.n:
                return Var(int(m.group(1)) - 1)
            raise UnknownSymbol(tok.text, tok.offset)
        if self._accept_op("(") is not None:
            e = self.expr()
            self._expect_op(")")
            return e
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"unexpected {found}", tok.offset)


def parse(text: str, n: int) -> Expression:
    """Parse ``text`` over the variables ``x1..xn`` and ``t``."""
    return _Parser(text, n).parse()


def evaluate(e: Expression, point: Sequence[float], time: float = 0.0) -> float:
    return e.evaluate(point, time)


def differentiate(e: Expression, var: Variable) -> Expression:
    """Exact derivative with respect to state index ``var`` (0-based) or ``"t"``."""
    return e.diff(var)


# ---------------------------------------------------------------------------
# Compilation

_SCALAR_NS = {"_sin": math.sin, "_cos": math.cos, "_exp": _exp, "_sqrt": _sqrt, "_pow": _pow, "_div": _div}


def _np_div(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.divide(a, b)


def _np_sqrt(a):
    with np.errstate(invalid="ignore"):
        return np.sqrt(a)


def _np_exp(a):
    with np.errstate(over="ignore"):
        return np.exp(a)


def _np_pow(a, k):
    with np.errstate(over="ignore"):
        return np.power(a, k)


_NUMPY_NS = {"_sin": np.sin, "_cos": np.cos, "_exp": _np_exp, "_sqrt": _np_sqrt, "_pow": _np_pow, "_div": _np_div}


def _compile_scalar(exprs: Sequence[Expression], single: bool = False):
    body = exprs[0]._src() if single else "(" + "".join(e._src() + ", " for e in exprs) + ")"
    return eval(f"lambda x, t=0.0: {body}", dict(_SCALAR_NS))


def compile_many(exprs: Sequence[Expression]) -> Callable[[Sequence[float], float], tuple]:
    """Scalar callable returning the tuple of all expression values."""
    return _compile_scalar(exprs)


def compile_vectorized(exprs: Sequence[Expression]) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Callable ``F(X, t)`` with ``X`` of shape ``(n, N)``, returning ``(len(exprs), N)``.

    Domain violations yield ``nan``/``inf`` instead of raising.
    """
    body = "(" + "".join(f"{e._src()} + _z, " for e in exprs) + ")"
    fn = eval(f"lambda x, t, _z: {body}", dict(_NUMPY_NS))

    def run(X, t=0.0):
        X = np.asarray(X, dtype=float)
        z = np.zeros(X.shape[1:])
        if not exprs:
            return np.zeros((0,) + X.shape[1:])
        return np.array(fn(X, t, z), dtype=float)

    return run
