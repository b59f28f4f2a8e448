"""Floating-point evaluation and randomized equivalence testing."""

from __future__ import annotations

import math
import random
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..errors import EvalDomainError, ExpansionLimitError, SamplingError, UnboundSymbolError
from .calculus import Lambda, _split_binding, substitute
from .nodes import Add, Exp, Expr, Fn, Log, Mul, Num, Pow, Sym, as_expr, iter_nodes
from .poly import normalize

DEFAULT_SEED = 20240607
DEFAULT_BOX = (0.3, 2.1)


def _pow(b: float, e: float) -> float:
    if b < 0 and e != int(e):
        raise EvalDomainError(f"non-integer power {e} of negative base {b}")
    if b == 0 and e < 0:
        raise EvalDomainError("zero raised to a negative power")
    return b**e


def _log(a: float) -> float:
    if a <= 0:
        raise EvalDomainError(f"logarithm of non-positive value {a}")
    return math.log(a)


def _exp(a: float) -> float:
    return math.exp(a)


class Compiled:
    """Straight-line Python code for an expression.

    ``inputs`` are the Sym/Fn nodes read from the argument vector; any other
    Fn node is evaluated through ``functions[name]`` at call time.
    """

    def __init__(self, e: Expr, inputs: Sequence[Expr]):
        self.expr = e
        self.inputs = tuple(inputs)
        slot = {n: i for i, n in enumerate(self.inputs)}
        lines = []
        names: dict = {}
        self._calls: list = []

        def emit(n: Expr) -> str:
            got = names.get(n)
            if got is not None:
                return got
            if n in slot:
                ref = f"vals[{slot[n]}]"
                names[n] = ref
                return ref
            if isinstance(n, Num):
                ref = repr(float(n.value))
                names[n] = ref
                return ref
            if isinstance(n, Sym):
                raise UnboundSymbolError(n.name)
            if isinstance(n, Add):
                code = " + ".join(emit(c) for c in n.terms)
            elif isinstance(n, Mul):
                code = " * ".join(emit(c) for c in n.factors)
            elif isinstance(n, Pow):
                b = emit(n.base)
                if isinstance(n.exp, Num) and n.exp.value.denominator == 1:
                    k = n.exp.value.numerator
                    code = f"_ipow({b}, {k})"
                else:
                    code = f"_pow({b}, {emit(n.exp)})"
            elif isinstance(n, Exp):
                code = f"_exp({emit(n.arg)})"
            elif isinstance(n, Log):
                code = f"_log({emit(n.arg)})"
            elif isinstance(n, Fn):
                args = ", ".join(emit(a) for a in n.args)
                self._calls.append((n.name, n.deriv))
                code = f"_call({n.name!r}, {n.deriv!r}, ({args},))"
            else:
                raise TypeError(f"cannot compile {type(n).__name__}")
            ref = f"v{len(lines)}"
            lines.append(f"    {ref} = {code}")
            names[n] = ref
            return ref

        # iterative post-order to avoid deep recursion on long chains
        order = []
        seen = set()
        stack = [(e, False)]
        while stack:
            n, done = stack.pop()
            if done:
                order.append(n)
                continue
            if n in seen:
                continue
            seen.add(n)
            stack.append((n, True))
            if n in slot:
                continue
            for c in reversed(n.children):
                if c not in seen:
                    stack.append((c, False))
        for n in order:
            emit(n)
        result = emit(e)
        src = "def _f(vals, _call):\n" + "\n".join(lines) + f"\n    return {result}\n"
        env = {"_pow": _pow, "_log": _log, "_exp": _exp, "_ipow": _ipow}
        exec(compile(src, "<boussym-expr>", "exec"), env)
        self._fn = env["_f"]

    def __call__(self, values: Sequence[float], functions: Mapping | None = None) -> float:
        functions = functions or {}

        def call(name, deriv, args):
            f = functions.get(name)
            if f is None:
                raise UnboundSymbolError(name)
            if any(deriv):
                d = getattr(f, "derivative", None)
                if d is None:
                    raise UnboundSymbolError(f"{name} derivative {deriv}")
                f = d(deriv)
            return float(f(*args))

        try:
            return self._fn(values, call)
        except EvalDomainError:
            raise
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise EvalDomainError(str(exc)) from None


def _ipow(b: float, k: int) -> float:
    if b == 0 and k < 0:
        raise EvalDomainError("zero raised to a negative power")
    return b**k


_COMPILE_CACHE: dict = {}


def compiled(e: Expr, inputs: Sequence[Expr]) -> Compiled:
    key = (e, tuple(inputs))
    c = _COMPILE_CACHE.get(key)
    if c is None:
        if len(_COMPILE_CACHE) > 512:
            _COMPILE_CACHE.clear()
        c = _COMPILE_CACHE[key] = Compiled(e, inputs)
    return c


def evaluate(e, binding: Mapping) -> float:
    """Evaluate ``e`` in double precision.

    Symbols must be bound to numbers (or expressions, substituted first).
    Function names may be bound to :class:`Lambda` objects or to Python
    callables; callables needing derivatives must expose
    ``derivative(index) -> callable``.
    """
    e = as_expr(e)
    symbolic = {}
    numeric: dict = {}
    callables: dict = {}
    for k, v in binding.items():
        if isinstance(v, (Lambda, Expr)):
            symbolic[k] = v
        elif callable(v):
            callables[k if isinstance(k, str) else k.name] = v
        else:
            name = k if isinstance(k, str) else k.name
            numeric[name] = float(v)
    if symbolic:
        e = substitute(e, symbolic)
    syms = sorted(e.free_symbols(), key=lambda s: s.key)
    values = []
    for s in syms:
        if s.name not in numeric:
            raise UnboundSymbolError(s.name)
        values.append(numeric[s.name])
    return compiled(e, syms)(values, callables)


eval_expr = evaluate


@dataclass
class EquivResult:
    equal: bool
    exact: bool
    trials: int
    seed: int
    tol: float
    max_error: float = 0.0
    worst_point: dict = field(default_factory=dict)


def _free_inputs(e: Expr, functions: Mapping) -> set:
    out = set(e.free_symbols())
    for n in iter_nodes(e):
        if isinstance(n, Fn) and n.name not in functions:
            out.add(n)
    return out


def equiv_detail(
    e1,
    e2,
    trials: int = 20,
    tol: float = 1e-10,
    seed: int = DEFAULT_SEED,
    box: tuple = DEFAULT_BOX,
    boxes: Mapping | None = None,
    binding: Mapping | None = None,
    max_attempts: int | None = None,
) -> EquivResult:
    """Randomized equivalence with a structural short-circuit.

    Free symbols (and unknown-function applications without a binding) are
    sampled independently and uniformly from ``box`` or from ``boxes[name]``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    e1 = as_expr(e1)
    e2 = as_expr(e2)
    binding = dict(binding or {})
    exact = {k: v for k, v in binding.items() if isinstance(v, (Lambda, Expr, int, Fraction))}
    syms, funcs = _split_binding(exact)
    callables = {
        (k if isinstance(k, str) else k.name): v
        for k, v in binding.items()
        if callable(v) and not isinstance(v, (Lambda, Expr))
    }
    numeric = {
        (k if isinstance(k, str) else k.name): float(v) for k, v in binding.items() if isinstance(v, float)
    }
    if syms or funcs:
        e1 = substitute(e1, {**syms, **funcs})
        e2 = substitute(e2, {**syms, **funcs})
    try:
        n1, n2 = normalize(e1), normalize(e2)
        if n1 == n2:
            return EquivResult(True, True, 0, seed, tol)
        e1, e2 = n1, n2
    except (ExpansionLimitError, EvalDomainError):
        pass
    inputs = sorted(
        (_free_inputs(e1, callables) | _free_inputs(e2, callables)),
        key=lambda n: n.key,
    )
    inputs = [n for n in inputs if not (isinstance(n, Sym) and n.name in numeric)]
    fixed_syms = sorted(
        (s for s in (e1.free_symbols() | e2.free_symbols()) if s.name in numeric), key=lambda s: s.key
    )
    all_inputs = inputs + fixed_syms
    c1 = compiled(e1, all_inputs)
    c2 = compiled(e2, all_inputs)
    rng = random.Random(seed)
    boxes = boxes or {}
    attempts = max_attempts or 50 * trials
    done = 0
    worst = 0.0
    worst_pt: dict = {}
    fixed_vals = [numeric[s.name] for s in fixed_syms]
    for _ in range(attempts):
        vals = []
        for n in inputs:
            lo, hi = boxes.get(_input_name(n), box)
            vals.append(rng.uniform(lo, hi))
        vals.extend(fixed_vals)
        try:
            a = c1(vals, callables)
            b = c2(vals, callables)
        except EvalDomainError:
            continue
        if not (math.isfinite(a) and math.isfinite(b)):
            continue
        done += 1
        err = abs(a - b) / (1 + abs(a) + abs(b))
        if err > worst:
            worst = err
            worst_pt = {_input_name(n): v for n, v in zip(all_inputs, vals)}
        if abs(a - b) > tol * (1 + abs(a) + abs(b)):
            return EquivResult(False, False, done, seed, tol, worst, worst_pt)
        if done >= trials:
            return EquivResult(True, False, done, seed, tol, worst, worst_pt)
    raise SamplingError(f"only {done} of {trials} sample points were admissible after {attempts} attempts")


def _input_name(n: Expr) -> str:
    if isinstance(n, Sym):
        return n.name
    from .printer import render

    return render(n)


def equiv(e1, e2, trials: int = 20, tol: float = 1e-10, **kwargs) -> bool:
    """True iff e1 and e2 agree at ``trials`` random admissible points."""
    return equiv_detail(e1, e2, trials=trials, tol=tol, **kwargs).equal
