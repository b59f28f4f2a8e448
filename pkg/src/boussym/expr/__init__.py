"""Exact symbolic expressions: parsing, printing, calculus, normal form and numerics."""

from .calculus import Lambda, diff, rebuild, substitute
from .nodes import (
    MAX_JET_ORDER,
    ONE,
    ZERO,
    Add,
    Exp,
    Expr,
    Fn,
    Log,
    Mul,
    Num,
    Pow,
    Sym,
    add,
    as_expr,
    exp,
    fn,
    iter_nodes,
    jet,
    jets_of,
    log,
    max_jet_order,
    mul,
    neg,
    param,
    params_of,
    power,
    sqrt,
    symbol,
    symbols,
    t,
    u,
    var,
    x,
    z,
)
from .numeric import DEFAULT_BOX, DEFAULT_SEED, EquivResult, compiled, equiv, equiv_detail, eval_expr, evaluate
from .parser import parse
from .poly import normalize, set_node_limit, to_expr, to_poly
from .printer import render


def is_zero(e) -> bool:
    """Exact zero test (normal form after clearing sum denominators)."""
    from .poly import is_zero_poly

    return is_zero_poly(to_poly(as_expr(e)))


__all__ = [
    "Add", "DEFAULT_BOX", "DEFAULT_SEED", "EquivResult", "Exp", "Expr", "Fn", "Lambda", "Log",
    "MAX_JET_ORDER", "Mul", "Num", "ONE", "Pow", "Sym", "ZERO", "add", "as_expr", "compiled",
    "diff", "equiv", "equiv_detail", "eval_expr", "evaluate", "exp", "fn", "is_zero", "iter_nodes",
    "jet", "jets_of", "log", "max_jet_order", "mul", "neg", "normalize", "param", "params_of",
    "parse", "power", "rebuild", "render", "set_node_limit", "sqrt", "substitute", "symbol",
    "symbols", "t", "to_expr", "to_poly", "u", "var", "x", "z",
]
