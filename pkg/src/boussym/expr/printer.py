"""Render expression trees in the same text grammar the parser reads."""

from __future__ import annotations

from fractions import Fraction

from .nodes import Add, Exp, Expr, Fn, Log, Mul, Num, Pow, Sym, mul

_ATOM = 100
_POW = 30
_UNARY = 25
_PRODUCT = 20
_SUM = 10


def render(e: Expr) -> str:
    return _render(e)[0]


def _wrap(e: Expr, minimum: int) -> str:
    s, prec = _render(e)
    return s if prec >= minimum else f"({s})"


def _num(v: Fraction) -> tuple[str, int]:
    if v.denominator == 1:
        return str(v.numerator), (_ATOM if v >= 0 else _UNARY)
    return f"{v.numerator}/{v.denominator}", _PRODUCT


def _fn(e: Fn) -> str:
    args = ",".join(render(a) for a in e.args)
    if len(e.args) == 1 and "_" not in e.name:
        return f"{e.name}{chr(39) * e.deriv[0]}({args})"
    if not any(e.deriv):
        if _subscript_candidate(e.name, e.args) is None:
            return f"{e.name}({args})"
    else:
        names = [a.name for a in e.args if isinstance(a, Sym)]
        if (
            len(names) == len(e.args)
            and len(set(names)) == len(names)
            and all(len(n) == 1 for n in names)
            and "_" not in e.name
        ):
            suffix = "".join(n * k for n, k in zip(names, e.deriv))
            return f"{e.name}_{suffix}({args})"
    idx = ",".join(str(k) for k in e.deriv)
    return f"{e.name}_[{idx}]({args})"


def _subscript_candidate(name: str, args) -> str | None:
    """Suffix that the parser would read as derivative letters, if any."""
    if "_" not in name:
        return None
    suffix = name.rsplit("_", 1)[1]
    argnames = {a.name for a in args if isinstance(a, Sym)}
    if suffix and all(ch in argnames for ch in suffix):
        return suffix
    return None


def _render(e: Expr) -> tuple[str, int]:
    if isinstance(e, Num):
        return _num(e.value)
    if isinstance(e, Sym):
        return e.name, _ATOM
    if isinstance(e, Fn):
        return _fn(e), _ATOM
    if isinstance(e, Exp):
        return f"exp({render(e.arg)})", _ATOM
    if isinstance(e, Log):
        return f"log({render(e.arg)})", _ATOM
    if isinstance(e, Pow):
        base = _wrap(e.base, _ATOM)
        ex, prec = _render(e.exp)
        if prec < _ATOM:
            ex = f"({ex})"
        return f"{base}^{ex}", _POW
    if isinstance(e, Mul):
        return _mul(e), _PRODUCT
    if isinstance(e, Add):
        parts = [render(e.terms[0]) if not isinstance(e.terms[0], Add) else f"({render(e.terms[0])})"]
        for term in e.terms[1:]:
            negated = _negated(term)
            if negated is not None:
                parts.append(" - " + _wrap(negated, _SUM + 1))
            else:
                parts.append(" + " + _wrap(term, _SUM + 1))
        return "".join(parts), _SUM
    raise TypeError(f"cannot render {type(e).__name__}")


def _negated(term: Expr) -> Expr | None:
    if isinstance(term, Num) and term.value < 0:
        return Num(-term.value)
    if isinstance(term, Mul) and isinstance(term.factors[0], Num) and term.factors[0].value < 0:
        return mul(Num(-term.factors[0].value), *term.factors[1:])
    return None


def _is_reciprocal(f: Expr) -> bool:
    return isinstance(f, Pow) and isinstance(f.exp, Num) and f.exp.value == -1


def _mul(e: Mul) -> str:
    factors = list(e.factors)
    out = ""
    if isinstance(factors[0], Num):
        v = factors.pop(0).value
        if v == -1:
            out = "-"
        elif _is_reciprocal(factors[0]):
            out = _num(v)[0]
        else:
            out = _num(v)[0] + "*"
    first = True
    for f in factors:
        if _is_reciprocal(f):
            if first and not out[-1:].isdigit():
                out += "1"
            out += "/" + _wrap(f.base, _PRODUCT + 1)
        else:
            if not first:
                out += "*"
            out += _wrap(f, _PRODUCT + 1)
        first = False
    return out
