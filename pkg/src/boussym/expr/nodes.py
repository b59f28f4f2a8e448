"""Immutable expression trees.

Every node carries a structural key (nested tuples) that doubles as its
identity and its canonical sort order.  Constructors apply only light,
idempotent clean-ups (flattening, folding of numeric factors, dropping
neutral elements) so that printing and re-parsing a tree reproduces it
exactly.  Real simplification lives in :mod:`boussym.expr.poly`.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Sequence, Union

Number = Union[int, Fraction]

DEPENDENT = "u"
MAX_JET_ORDER = 6
INDEPENDENT_VARIABLES = frozenset({"x", "t", "z"})
_KIND_RANK = {"param": 0, "var": 1, "jet": 2}
_JET_RE = re.compile(r"^u_([xt]+)$")


class Expr:
    """Base class.  Subclasses are immutable after ``__init__``."""

    __slots__ = ("_key", "_hash", "_poly", "_free")
    rank = -1

    def _make_key(self) -> tuple:
        raise NotImplementedError

    @property
    def key(self) -> tuple:
        k = self._key
        if k is None:
            k = self._key = self._make_key()
        return k

    @property
    def children(self) -> tuple:
        return ()

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            h = self._hash = hash(self.key)
        return h

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Expr):
            if isinstance(other, (int, Fraction)):
                other = Num(other)
            else:
                return NotImplemented
        return hash(self) == hash(other) and self.key == other.key

    def __ne__(self, other) -> bool:
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __lt__(self, other: "Expr") -> bool:
        return self.key < other.key

    # arithmetic sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), MINUS_ONE))

    def __rtruediv__(self, other):
        return mul(as_expr(other), power(self, MINUS_ONE))

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __rpow__(self, other):
        return power(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pos__(self):
        return self

    def __repr__(self) -> str:
        from .printer import render

        return f"Expr({render(self)!r})"

    def __str__(self) -> str:
        from .printer import render

        return render(self)

    def free_symbols(self) -> frozenset:
        fs = self._free
        if fs is None:
            acc = set()
            for c in self.children:
                acc |= c.free_symbols()
            fs = self._free = frozenset(acc)
        return fs


class Num(Expr):
    __slots__ = ("value",)
    rank = 0

    def __init__(self, value: Number):
        self.value = Fraction(value)
        self._key = self._hash = self._poly = self._free = None

    def _make_key(self):
        return (0, self.value)

    def free_symbols(self):
        return frozenset()


class Sym(Expr):
    """A variable (x, t, z), a jet coordinate (u, u_x, ...) or a parameter."""

    __slots__ = ("name", "kind", "index")
    rank = 1

    def __init__(self, name: str, kind: str, index: tuple = ()):
        if kind not in _KIND_RANK:
            raise ValueError(f"unknown symbol kind {kind!r}")
        self.name = name
        self.kind = kind
        self.index = tuple(index)
        self._key = self._hash = self._poly = self._free = None

    def _make_key(self):
        return (1, _KIND_RANK[self.kind], self.name, self.index)

    def free_symbols(self):
        fs = self._free
        if fs is None:
            fs = self._free = frozenset((self,))
        return fs

    @property
    def order(self) -> int:
        return sum(self.index)


class Fn(Expr):
    """Application of an unknown function, possibly differentiated.

    ``deriv[i]`` counts partial derivatives in the i-th argument slot.
    """

    __slots__ = ("name", "args", "deriv")
    rank = 2

    def __init__(self, name: str, args: Sequence[Expr], deriv: Sequence[int] | None = None):
        self.name = name
        self.args = tuple(args)
        self.deriv = tuple(deriv) if deriv is not None else (0,) * len(self.args)
        if len(self.deriv) != len(self.args):
            raise ValueError("derivative index must have one entry per argument")
        self._key = self._hash = self._poly = self._free = None

    def _make_key(self):
        return (2, self.name, self.deriv, tuple(a.key for a in self.args))

    @property
    def children(self):
        return self.args

    def with_deriv(self, deriv: Sequence[int]) -> "Fn":
        return Fn(self.name, self.args, deriv)

    def with_args(self, args: Sequence[Expr]) -> "Fn":
        return Fn(self.name, args, self.deriv)


class Log(Expr):
    __slots__ = ("arg",)
    rank = 3

    def __init__(self, arg: Expr):
        self.arg = arg
        self._key = self._hash = self._poly = self._free = None

    def _make_key(self):
        return (3, self.arg.key)

    @property
    def children(self):
        return (self.arg,)


class Exp(Expr):
    __slots__ = ("arg",)
    rank = 4

    def __init__(self, arg: Expr):
        self.arg = arg
        self._key = self._hash = self._poly = self._free = None

    def _make_key(self):
        return (4, self.arg.key)

    @property
    def children(self):
        return (self.arg,)


class Pow(Expr):
    __slots__ = ("base", "exp")
    rank = 5

    def __init__(self, base: Expr, exp: Expr):
        self.base = base
        self.exp = exp
        self._key = self._hash = self._poly = self._free = None

    def _make_key(self):
        return (5, self.base.key, self.exp.key)

    @property
    def children(self):
        return (self.base, self.exp)


class Mul(Expr):
    __slots__ = ("factors",)
    rank = 6

    def __init__(self, factors: Sequence[Expr]):
        self.factors = tuple(factors)
        self._key = self._hash = self._poly = self._free = None

    def _make_key(self):
        return (6, tuple(f.key for f in self.factors))

    @property
    def children(self):
        return self.factors


class Add(Expr):
    __slots__ = ("terms",)
    rank = 7

    def __init__(self, terms: Sequence[Expr]):
        self.terms = tuple(terms)
        self._key = self._hash = self._poly = self._free = None

    def _make_key(self):
        return (7, tuple(t.key for t in self.terms))

    @property
    def children(self):
        return self.terms


ZERO = Num(0)
ONE = Num(1)
MINUS_ONE = Num(-1)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not expressions")
    if isinstance(value, (int, Fraction)):
        return Num(value)
    if isinstance(value, float):
        # decimal-exact conversion keeps 0.1 as 1/10
        return Num(Fraction(repr(value)))
    if isinstance(value, str):
        from .parser import parse

        return parse(value)
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")


# light-weight constructors -----------------------------------------------


def add(*terms) -> Expr:
    flat: list[Expr] = []
    const = Fraction(0)
    for t in terms:
        t = as_expr(t)
        if isinstance(t, Add):
            for s in t.terms:
                if isinstance(s, Num):
                    const += s.value
                else:
                    flat.append(s)
        elif isinstance(t, Num):
            const += t.value
        else:
            flat.append(t)
    if const:
        flat.append(Num(const))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(flat)


def mul(*factors) -> Expr:
    flat: list[Expr] = []
    const = Fraction(1)
    for f in factors:
        f = as_expr(f)
        if isinstance(f, Mul):
            for g in f.factors:
                if isinstance(g, Num):
                    const *= g.value
                else:
                    flat.append(g)
        elif isinstance(f, Num):
            const *= f.value
        else:
            flat.append(f)
    if const == 0:
        return ZERO
    if not flat:
        return Num(const)
    if const != 1:
        flat.insert(0, Num(const))
    if len(flat) == 1:
        return flat[0]
    return Mul(flat)


def power(base, exponent) -> Expr:
    base = as_expr(base)
    exponent = as_expr(exponent)
    if isinstance(exponent, Num):
        e = exponent.value
        if e == 1:
            return base
        if e == 0:
            return ONE
        if isinstance(base, Num):
            b = base.value
            if b == 1:
                return ONE
            if e.denominator == 1:
                if b == 0 and e < 0:
                    raise ZeroDivisionError("0 raised to a negative power")
                return Num(b ** int(e))
    return Pow(base, exponent)


def neg(e) -> Expr:
    return mul(MINUS_ONE, e)


def exp(arg) -> Expr:
    arg = as_expr(arg)
    if arg == ZERO:
        return ONE
    return Exp(arg)


def log(arg) -> Expr:
    arg = as_expr(arg)
    if arg == ONE:
        return ZERO
    return Log(arg)


def sqrt(arg) -> Expr:
    return power(arg, Num(Fraction(1, 2)))


# symbols ------------------------------------------------------------------


def jet_name(i: int, j: int, base: str = DEPENDENT) -> str:
    if i == 0 and j == 0:
        return base
    return f"{base}_{'x' * i}{'t' * j}"


def jet(i: int, j: int = 0) -> Sym:
    """Jet coordinate u_{x^i t^j}; ``jet(0, 0)`` is u itself."""
    if i < 0 or j < 0:
        raise ValueError("jet indices must be non-negative")
    if i + j > MAX_JET_ORDER:
        from ..errors import JetOrderError

        raise JetOrderError(f"jet order {i + j} exceeds maximum {MAX_JET_ORDER}")
    return Sym(jet_name(i, j), "jet", (i, j))


def var(name: str) -> Sym:
    return Sym(name, "var")


def param(name: str) -> Sym:
    return Sym(name, "param")


def classify_identifier(name: str) -> Sym | None:
    """Symbol for a bare identifier, or None when it fits no symbol class."""
    if name == DEPENDENT:
        return jet(0, 0)
    if name in INDEPENDENT_VARIABLES:
        return var(name)
    m = _JET_RE.match(name)
    if m:
        letters = m.group(1)
        return jet(letters.count("x"), letters.count("t"))
    if name.startswith(DEPENDENT + "_"):
        return None
    return param(name)


def symbol(name: str) -> Sym:
    s = classify_identifier(name)
    if s is None:
        raise ValueError(f"{name!r} is not a valid symbol name")
    return s


def symbols(names: str) -> tuple:
    return tuple(symbol(n) for n in names.replace(",", " ").split())


x, t, z = var("x"), var("t"), var("z")
u = jet(0, 0)


def fn(name: str, *args, deriv: Iterable[int] | None = None) -> Fn:
    return Fn(name, tuple(as_expr(a) for a in args), None if deriv is None else tuple(deriv))


def iter_nodes(e: Expr):
    """Pre-order traversal."""
    stack = [e]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(n.children))


def atoms_of(e: Expr, cls) -> set:
    return {n for n in iter_nodes(e) if isinstance(n, cls)}


def functions_of(e: Expr) -> set:
    return {n.name for n in iter_nodes(e) if isinstance(n, Fn)}


def jets_of(e: Expr) -> set:
    return {s for s in e.free_symbols() if s.kind == "jet"}


def params_of(e: Expr) -> set:
    return {s for s in e.free_symbols() if s.kind == "param"}


def max_jet_order(e: Expr) -> int:
    return max((s.order for s in jets_of(e)), default=-1)
