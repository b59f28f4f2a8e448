"""Differentiation and simultaneous substitution."""

from __future__ import annotations

from typing import Mapping, Sequence

from .nodes import Add, Exp, Expr, Fn, Log, Mul, Num, Pow, Sym, add, as_expr, exp, log, mul, power, symbol
from .poly import pdiff, to_expr, to_poly


def _as_symbol(v) -> Sym:
    if isinstance(v, Sym):
        return v
    if isinstance(v, str):
        return symbol(v)
    raise TypeError(f"expected a symbol, got {type(v).__name__}")


def diff(e, v, times: int = 1) -> Expr:
    """Exact partial derivative, returned in normal form.

    Jet coordinates are independent symbols, so ``diff(u*u_x, u_x) == u``.
    """
    v = _as_symbol(v)
    p = to_poly(as_expr(e))
    for _ in range(times):
        p = pdiff(p, v)
    return to_expr(p)


class Lambda:
    """A function given by an expression in its parameters, e.g. f = u -> u^2/2 + u."""

    __slots__ = ("params", "body", "_derivs")

    def __init__(self, params, body):
        if isinstance(params, (Sym, str)):
            params = (params,)
        self.params = tuple(_as_symbol(p) for p in params)
        self.body = as_expr(body)
        self._derivs: dict = {}

    def derivative(self, deriv: Sequence[int]) -> Expr:
        deriv = tuple(deriv)
        if len(deriv) != len(self.params):
            raise ValueError("derivative index length differs from parameter count")
        d = self._derivs.get(deriv)
        if d is None:
            p = to_poly(self.body)
            for sym, k in zip(self.params, deriv):
                for _ in range(k):
                    p = pdiff(p, sym)
            d = self._derivs[deriv] = to_expr(p) if any(deriv) else self.body
        return d

    def __call__(self, *args) -> Expr:
        return substitute(self.body, dict(zip(self.params, (as_expr(a) for a in args))))

    def __repr__(self) -> str:
        names = ", ".join(p.name for p in self.params)
        return f"Lambda(({names}), {self.body})"


def _split_binding(binding: Mapping) -> tuple[dict, dict]:
    syms: dict = {}
    funcs: dict = {}
    for k, v in binding.items():
        if isinstance(v, Lambda):
            funcs[k if isinstance(k, str) else k.name] = v
            continue
        key = _as_symbol(k)
        syms[key] = as_expr(v)
    return syms, funcs


def rebuild(node: Expr, children: Sequence[Expr]) -> Expr:
    """Same node type over new children, using the simplifying constructors."""
    if isinstance(node, Add):
        return add(*children)
    if isinstance(node, Mul):
        return mul(*children)
    if isinstance(node, Pow):
        return power(children[0], children[1])
    if isinstance(node, Exp):
        return exp(children[0])
    if isinstance(node, Log):
        return log(children[0])
    if isinstance(node, Fn):
        return Fn(node.name, children, node.deriv)
    return node


def substitute(e, binding: Mapping) -> Expr:
    """Simultaneous replacement of symbols and unknown functions.

    ``binding`` maps symbols (or their names) to expressions/numbers and
    function names to :class:`Lambda` objects.  Replacements are not
    themselves re-substituted.
    """
    e = as_expr(e)
    if not binding:
        return e
    syms, funcs = _split_binding(binding)
    memo: dict = {}

    def walk(n: Expr) -> Expr:
        hit = memo.get(id(n))
        if hit is not None:
            return hit[1]
        if isinstance(n, Sym):
            out = syms.get(n, n)
        elif isinstance(n, Num):
            out = n
        else:
            kids = [walk(c) for c in n.children]
            if isinstance(n, Fn) and n.name in funcs:
                lam = funcs[n.name]
                body = lam.derivative(n.deriv)
                out = substitute(body, dict(zip(lam.params, kids)))
            elif all(a is b for a, b in zip(kids, n.children)):
                out = n
            else:
                out = rebuild(n, kids)
        memo[id(n)] = (n, out)
        return out

    return walk(e)
