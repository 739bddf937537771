"""Vector fields, Lie brackets and iterated formal brackets."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence, Union

import numpy as np

from . import expr as ex
from .errors import InputError


class DimensionMismatch(InputError):
    pass


@dataclass(frozen=True, eq=True)
class VectorField:
    """An autonomous vector field on R^n given by ``n`` component expressions."""

    n: int
    components: tuple[ex.Expression, ...]

    def __post_init__(self):
        if len(self.components) != self.n:
            raise DimensionMismatch(f"expected {self.n} components, got {len(self.components)}")
        for comp in self.components:
            for v in comp.variables():
                if v == ex.TIME:
                    raise InputError("vector fields must be autonomous (no 't')")
                if v >= self.n:
                    raise DimensionMismatch(f"variable x{v + 1} outside R^{self.n}")

    @classmethod
    def parse(cls, texts: Sequence[str], n: int) -> VectorField:
        return cls(n, tuple(ex.parse(t, n) for t in texts))

    @classmethod
    def constant(cls, values: Sequence[float]) -> VectorField:
        return cls(len(values), tuple(ex.Const(float(v)) for v in values))

    def __str__(self):
        return "(" + ", ".join(str(c) for c in self.components) + ")"

    # Compiled callables are cached per instance and dropped when pickling.
    def __getstate__(self):
        return {"n": self.n, "components": self.components}

    def __setstate__(self, state):
        object.__setattr__(self, "n", state["n"])
        object.__setattr__(self, "components", state["components"])

    @cached_property
    def _scalar(self):
        return ex.compile_many(self.components)

    @cached_property
    def _vector(self):
        return ex.compile_vectorized(self.components)

    @cached_property
    def jacobian_exprs(self) -> tuple[tuple[ex.Expression, ...], ...]:
        return jacobian(self)

    @cached_property
    def _jac_vector(self):
        flat = [e for row in self.jacobian_exprs for e in row]
        return ex.compile_vectorized(flat)

    @cached_property
    def is_zero(self) -> bool:
        return all(isinstance(c, ex.Const) and c.value == 0 for c in self.components)

    def __call__(self, x: Sequence[float]) -> np.ndarray:
        return np.array(self._scalar(x), dtype=float)

    def many(self, X: np.ndarray) -> np.ndarray:
        """Evaluate at the columns of ``X`` (shape ``(n, N)``); returns ``(n, N)``."""
        return self._vector(X)

    def jacobian_many(self, X: np.ndarray) -> np.ndarray:
        """Jacobians at the columns of ``X``; returns shape ``(N, n, n)``."""
        X = np.asarray(X, dtype=float)
        vals = self._jac_vector(X)
        return np.moveaxis(vals.reshape(self.n, self.n, -1), -1, 0)

    def jacobian_at(self, x: Sequence[float]) -> np.ndarray:
        return self.jacobian_many(np.asarray(x, dtype=float)[:, None])[0]


def jacobian(v: VectorField) -> tuple[tuple[ex.Expression, ...], ...]:
    """Matrix of expressions with entry ``(i, j) = d v_i / d x_j``."""
    return tuple(tuple(ex.differentiate(c, j) for j in range(v.n)) for c in v.components)


def lie_bracket(h: VectorField, k: VectorField) -> VectorField:
    """``[h, k](x) = Dk(x) h(x) - Dh(x) k(x)``."""
    if h.n != k.n:
        raise DimensionMismatch(f"cannot bracket fields on R^{h.n} and R^{k.n}")
    Dh, Dk = h.jacobian_exprs, k.jacobian_exprs
    comps = []
    for i in range(h.n):
        acc: ex.Expression = ex.ZERO
        for j in range(h.n):
            acc = ex.add(acc, ex.mul(Dk[i][j], h.components[j]))
            acc = ex.sub(acc, ex.mul(Dh[i][j], k.components[j]))
        comps.append(acc)
    return VectorField(h.n, tuple(comps))


# ---------------------------------------------------------------------------
# Formal brackets


@dataclass(frozen=True)
class Leaf:
    index: int  # 0-based position in the field tuple

    @property
    def degree(self) -> int:
        return 1

    def leaves(self) -> tuple[int, ...]:
        return (self.index,)

    def key(self):
        return (1, self.index)

    def __str__(self):
        return f"g{self.index + 1}"


@dataclass(frozen=True)
class Node:
    left: "FormalBracket"
    right: "FormalBracket"

    @cached_property
    def degree(self) -> int:
        return self.left.degree + self.right.degree

    def leaves(self) -> tuple[int, ...]:
        return self.left.leaves() + self.right.leaves()

    def key(self):
        return (self.degree, self.left.key(), self.right.key())

    def __str__(self):
        return f"[{self.left},{self.right}]"


FormalBracket = Union[Leaf, Node]

_SEXP_TOKEN = re.compile(r"\s*(\[|\]|,|[A-Za-z]+\d+)")


def parse_bracket(text: str, prefix: str = "g") -> FormalBracket:
    """Parse the report notation, e.g. ``[[g1,g2],g1]``."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _SEXP_TOKEN.match(text, pos)
        if not m:
            raise InputError(f"bad bracket syntax at offset {pos}: {text!r}")
        tokens.append(m.group(1))
        pos = m.end()
    it = iter(tokens + [None])
    cur = [next(it)]

    def take():
        tok = cur[0]
        cur[0] = next(it)
        return tok

    def node():
        tok = take()
        if tok == "[":
            a = node()
            if take() != ",":
                raise InputError(f"expected ',' in {text!r}")
            b = node()
            if take() != "]":
                raise InputError(f"expected ']' in {text!r}")
            return Node(a, b)
        if tok and tok.startswith(prefix) and tok[len(prefix):].isdigit():
            return Leaf(int(tok[len(prefix):]) - 1)
        raise InputError(f"unexpected token {tok!r} in {text!r}")

    out = node()
    if cur[0] is not None:
        raise InputError(f"trailing input in {text!r}")
    return out


def build_bracket(B: FormalBracket, fields: Sequence[VectorField], _cache: dict | None = None) -> VectorField:
    """Symbolic ``B(h)`` for the tuple ``fields``."""
    cache = {} if _cache is None else _cache
    if B in cache:
        return cache[B]
    if isinstance(B, Leaf):
        if not 0 <= B.index < len(fields):
            raise InputError(f"leaf {B} outside a tuple of {len(fields)} fields")
        out = fields[B.index]
    else:
        out = lie_bracket(build_bracket(B.left, fields, cache), build_bracket(B.right, fields, cache))
    cache[B] = out
    return out


def eval_formal(B: FormalBracket, fields: Sequence[VectorField], x: Sequence[float]) -> np.ndarray:
    """Value of ``B(fields)`` at the point ``x``."""
    x = np.asarray(x, dtype=float)
    for f in fields:
        if f.n != x.size:
            raise DimensionMismatch(f"point of dimension {x.size} for fields on R^{f.n}")
    return build_bracket(B, fields)(x)


@dataclass(frozen=True)
class BracketFamily:
    """Iterated brackets of ``g_1..g_{m1}`` used by the higher-order conditions.

    ``tag`` is ``"B0"`` (orthogonality along the whole arc) or ``"B1"``
    (mixed bracket identity with the drift and the cone-constrained fields).
    """

    tag: str
    m1: int
    max_degree: int
    brackets: tuple[FormalBracket, ...] = field(default=())

    def __iter__(self) -> Iterator[FormalBracket]:
        return iter(self.brackets)

    def __len__(self):
        return len(self.brackets)

    def labels(self) -> list[str]:
        return [str(b) for b in self.brackets]


def enumerate_family(m1: int, max_degree: int = 3, tag: str = "B0") -> BracketFamily:
    """All brackets of degree <= ``max_degree`` over ``g_1..g_{m1}``.

    Deduplicated by antisymmetry only: ``[A,B]`` is kept when ``A`` precedes
    ``B`` in the canonical order (degree first, then structure), ``[A,A]`` is
    dropped. Repeated leaves are otherwise allowed.
    """
    if tag not in ("B0", "B1"):
        raise InputError(f"unknown family tag {tag!r}")
    if max_degree < 1:
        raise InputError("max_degree must be >= 1")
    by_degree: dict[int, list[FormalBracket]] = {1: [Leaf(i) for i in range(m1)]}
    for d in range(2, max_degree + 1):
        level = []
        for a in range(1, d // 2 + 1):
            for A, B in itertools.product(by_degree[a], by_degree[d - a]):
                if A == B or (a == d - a and A.key() > B.key()):
                    continue
                level.append(Node(A, B))
        by_degree[d] = sorted(level, key=lambda b: b.key())
    out = tuple(b for d in range(1, max_degree + 1) for b in by_degree[d])
    return BracketFamily(tag, m1, max_degree, out)
