"""Classical and nonclassical determining systems of the generalized
Boussinesq equation u_tt - u_xx + (f(u) + u_xx)_xx = 0.

Both systems are built once with f kept as an unknown function (f, f', f'',
f''' independent atoms) and cached; a concrete f is substituted afterwards,
which is valid because f depends on u alone and never on a split jet.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

from .errors import EvalDomainError, ExpansionLimitError, UnboundParameterError
from .expr import (
    DEFAULT_SEED,
    Expr,
    Fn,
    Lambda,
    as_expr,
    compiled,
    jet,
    normalize,
    parse,
    render,
    substitute,
    t,
    to_expr,
    to_poly,
    u,
    x,
)
from .expr.nodes import Sym, iter_nodes
from .expr.poly import (
    RAT,
    PLAIN,
    coefficient_split,
    is_zero_poly,
    mono_expr,
    padd,
    pneg,
    pmul,
    psubs,
    pscale,
    sorted_monos,
)
from .jet import VectorField, apply_prolonged_poly, poly_jets, prolong, required_indices, symbolic_field, total_derivative_poly
from .report import Report

PDE_TEXT = "u_tt - u_xx + d2x(f(u) + u_xx)"
FIELD_ARGS = (x, t, u)


@dataclass(frozen=True)
class FSpec:
    """The nonlinearity f(u): symbolic (``expr is None``) or a concrete expression in u."""

    expr: Expr | None = None

    @classmethod
    def symbolic(cls) -> "FSpec":
        return cls(None)

    @classmethod
    def concrete(cls, f) -> "FSpec":
        e = as_expr(f)
        stray = [s.name for s in e.free_symbols() if s.kind != "param" and s != u]
        if stray:
            raise ValueError(f"f may depend only on u and parameters, found {sorted(stray)}")
        return cls(normalize(e))

    @property
    def is_symbolic(self) -> bool:
        return self.expr is None

    def as_lambda(self) -> Lambda | None:
        return None if self.expr is None else Lambda((u,), self.expr)

    def params(self) -> set:
        if self.expr is None:
            return set()
        return {s for s in self.expr.free_symbols() if s.kind == "param"}

    def describe(self) -> str:
        return "f(u)" if self.expr is None else render(self.expr)


def pde_poly():
    return to_poly(parse(PDE_TEXT))


def pde(f: FSpec | None = None) -> Expr:
    e = parse(PDE_TEXT)
    if f is not None and not f.is_symbolic:
        e = normalize(substitute(e, {"f": f.as_lambda()}))
    return e


@dataclass
class DeterminingSystem:
    method: str
    equations: list
    basis: list
    f: FSpec
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.equations)

    def params(self) -> set:
        out = set(self.f.params())
        for e in self.equations:
            out |= {s for s in e.free_symbols() if s.kind == "param"}
        return out

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "f": self.f.describe(),
            "count": len(self.equations),
            "equations": [render(e) for e in self.equations],
            "basis": [[m for m in b] for b in self.basis],
            "metadata": self.metadata,
        }


def _is_split_entry(en) -> bool:
    a = en[2]
    return en[1] == RAT and en[4] == PLAIN and isinstance(a, Sym) and a.kind == "jet" and a.order >= 1


def _monic(p) -> tuple:
    m = sorted_monos(p)[0]
    c = p[m]
    if c != 1:
        p = pscale(p, 1 / c)
    return p


def _split(P, note: dict) -> tuple[list, list]:
    groups = coefficient_split(P, _is_split_entry)
    eqs: dict = {}
    order = []
    for key in sorted(groups, key=lambda m: render(mono_expr(m))):
        coeff = groups[key]
        if not coeff:
            continue
        e = to_expr(_monic(coeff))
        label = render(mono_expr(key))
        if e in eqs:
            eqs[e].append(label)
        else:
            eqs[e] = [label]
            order.append(e)
    note["split_monomials"] = len(groups)
    return order, [eqs[e] for e in order]


def _eliminate_utt() -> dict:
    """u_tt and its consequences from the PDE, in terms of jets with at most one t."""
    T = padd(
        to_poly(jet(2, 0)),
        pneg(pmul(to_poly(parse("f'(u)")), to_poly(jet(2, 0)))),
        pneg(pmul(to_poly(parse("f''(u)")), to_poly(parse("u_x^2")))),
        pneg(to_poly(jet(4, 0))),
    )
    return {jet(0, 2): T}


def _manifold_closure(P, base: dict, fixed_point) -> dict:
    """Replacement map covering every jet of P that ``fixed_point`` says must go."""
    repl = {}
    for s in poly_jets(P):
        r = fixed_point(s)
        if r is not None:
            repl[s] = r
    return repl


@lru_cache(maxsize=None)
def _classical_symbolic():
    F = pde_poly()
    S = symbolic_field()
    PV = prolong(S, 4, indices=required_indices(F))
    P = apply_prolonged_poly(PV, F)
    base = _eliminate_utt()
    cache = dict(base)

    def reduce_jet(s):
        i, j = s.index
        if j < 2:
            return None
        got = cache.get(s)
        if got is None:
            expr = base[jet(0, 2)]
            for _ in range(i):
                expr = total_derivative_poly(expr, "x")
            for _ in range(j - 2):
                expr = total_derivative_poly(expr, "t")
            expr = psubs(expr, _manifold_closure(expr, base, reduce_jet))
            cache[s] = expr
            got = expr
        return got

    P = psubs(P, _manifold_closure(P, base, reduce_jet))
    note = {"prolonged_terms": len(P)}
    eqs, basis = _split(P, note)
    return eqs, basis, note


@lru_cache(maxsize=None)
def _nonclassical_symbolic():
    F = pde_poly()
    S = symbolic_field(q_one=True)
    PV = prolong(S, 4, indices=required_indices(F))
    P = apply_prolonged_poly(PV, F)
    p_ = to_poly(S.p)
    r_ = to_poly(S.r)
    G = padd(r_, pneg(pmul(p_, to_poly(jet(1, 0)))))
    tjets: dict = {}

    def t_free(expr):
        """Replace every jet containing a t-derivative by its x-only form."""
        targets = [s for s in poly_jets(expr) if s.index[1] >= 1]
        if not targets:
            return expr
        return psubs(expr, {s: t_form(s) for s in targets})

    def t_form(s):
        got = tjets.get(s)
        if got is not None:
            return got
        i, j = s.index
        if j == 1:
            out = G if i == 0 else total_derivative_poly(t_form(jet(i - 1, 1)), "x")
        else:
            out = t_free(total_derivative_poly(t_form(jet(i, j - 1)), "t"))
        tjets[s] = out
        return out

    P = t_free(P)
    Fx = t_free(F)
    # the PDE is linear in u_xxxx with unit coefficient once t-jets are gone
    u4 = jet(4, 0)
    u4_repl = pneg(psubs(Fx, {u4: {}}))
    check = padd(Fx, pneg(padd(to_poly(u4), pneg(u4_repl))))
    if check:
        raise RuntimeError("PDE is not of the form u_xxxx + (lower order) after t-elimination")
    P = psubs(P, {u4: u4_repl})
    note = {"prolonged_terms": len(P), "q": 1}
    eqs, basis = _split(P, note)
    return eqs, basis, note


def _concrete(eqs: Sequence[Expr], basis: Sequence, f: FSpec) -> tuple[list, list]:
    lam = f.as_lambda()
    out: dict = {}
    order = []
    for e, b in zip(eqs, basis):
        p = to_poly(normalize(substitute(e, {"f": lam})))
        if not p:
            continue
        ce = to_expr(_monic(p))
        if ce in out:
            out[ce].extend(b)
        else:
            out[ce] = list(b)
            order.append(ce)
    return order, [out[e] for e in order]


@lru_cache(maxsize=64)
def _build(method: str, f: FSpec) -> DeterminingSystem:
    eqs, basis, note = _classical_symbolic() if method == "classical" else _nonclassical_symbolic()
    meta = dict(note)
    meta["pde"] = render(pde(f))
    if method == "nonclassical":
        meta["surface_condition"] = "p*u_x + u_t - r = 0"
    if not f.is_symbolic:
        eqs, basis = _concrete(eqs, basis, f)
    return DeterminingSystem(method, list(eqs), [list(b) for b in basis], f, meta)


def _as_fspec(f) -> FSpec:
    if f is None:
        return FSpec.symbolic()
    if isinstance(f, FSpec):
        return f
    return FSpec.concrete(f)


def build_classical(f=None) -> DeterminingSystem:
    """Classical determining equations for p, q, r (u_tt eliminated through the PDE)."""
    return _build("classical", _as_fspec(f))


def build_nonclassical(f=None) -> DeterminingSystem:
    """Nonclassical determining equations with q = 1 and the surface condition
    p*u_x + u_t = r used to remove every t-derivative."""
    return _build("nonclassical", _as_fspec(f))


# ---------------------------------------------------------------------------
# candidates


class NumericField:
    """A coefficient given numerically: ``fun(x, t, u)`` plus partial derivatives.

    ``derivs`` maps multi-indices (dx, dt, du) to callables; missing entries
    raise ``KeyError`` when requested.
    """

    def __init__(self, fun: Callable, derivs: Mapping | None = None):
        self.fun = fun
        self.derivs = dict(derivs or {})

    def __call__(self, *args):
        return self.fun(*args)

    def derivative(self, index: Sequence[int]) -> Callable:
        index = tuple(index)
        if not any(index):
            return self.fun
        return self.derivs[index]


@dataclass
class Candidate:
    p: object
    r: object
    q: object = None

    @property
    def numeric(self) -> bool:
        return any(isinstance(v, NumericField) for v in (self.p, self.q, self.r))


def _candidate(S: DeterminingSystem, cand) -> Candidate:
    if isinstance(cand, Candidate):
        c = cand
    elif isinstance(cand, VectorField):
        c = Candidate(cand.p, cand.r, cand.q)
    elif isinstance(cand, (tuple, list)) and len(cand) == 2:
        c = Candidate(cand[0], cand[1], None)
    elif isinstance(cand, (tuple, list)) and len(cand) == 3:
        c = Candidate(cand[0], cand[2], cand[1])
    else:
        raise TypeError("candidate must be a VectorField, a (p, r) pair or a Candidate")
    if c.numeric:
        return c
    p = as_expr(c.p)
    r = as_expr(c.r)
    q = None if c.q is None else as_expr(c.q)
    if S.method == "classical":
        if q is None:
            raise ValueError("classical systems need a q coefficient")
        return Candidate(p, r, q)
    if q is not None:
        qn = normalize(q)
        if qn == as_expr(0):
            raise ValueError("the q = 0 branch of the nonclassical method is not implemented")
        if qn != as_expr(1):
            p = normalize(p / qn)
            r = normalize(r / qn)
    return Candidate(p, r, None)


def _sample(rng: random.Random, names: Sequence[str], boxes: Mapping, box) -> list:
    return [rng.uniform(*boxes.get(n, box)) for n in names]


def _numeric_residual(e: Expr, callables: Mapping, trials: int, seed: int, boxes: Mapping, box, fixed: Mapping | None = None):
    """Largest |e| over random admissible points, and the number of points used."""
    fixed = fixed or {}
    inputs = sorted(
        {s for s in e.free_symbols() if s.name not in fixed}
        | {n for n in iter_nodes(e) if isinstance(n, Fn) and n.name not in callables},
        key=lambda n: n.key,
    )
    fixed_syms = sorted((s for s in e.free_symbols() if s.name in fixed), key=lambda s: s.key)
    c = compiled(e, inputs + fixed_syms)
    names = [n.name if isinstance(n, Sym) else render(n) for n in inputs]
    rng = random.Random(seed)
    worst = 0.0
    used = 0
    for _ in range(50 * trials):
        vals = _sample(rng, names, boxes, box) + [float(fixed[s.name]) for s in fixed_syms]
        try:
            v = c(vals, callables)
        except (EvalDomainError, KeyError):
            continue
        if not math.isfinite(v):
            continue
        used += 1
        worst = max(worst, abs(v))
        if used >= trials:
            break
    return worst, used


def residuals(
    S: DeterminingSystem,
    candidate,
    tol: float = 1e-8,
    trials: int = 100,
    seed: int = DEFAULT_SEED,
    boxes: Mapping | None = None,
    box: tuple = (0.3, 2.1),
    params: Mapping | None = None,
) -> Report:
    """Substitute a candidate into every equation of ``S``.

    Symbolic candidates are first tested for exact vanishing; equations that
    do not reduce to zero exactly are sampled numerically.  Numeric
    candidates (:class:`NumericField` coefficients) are sampled directly.
    ``params`` fixes numeric values of leftover parameters during sampling.
    """
    boxes = dict(boxes or {})
    params = dict(params or {})
    c = _candidate(S, candidate)
    report = Report(
        label=f"{S.method} residuals",
        passed=True,
        tolerance=tol,
        seed=seed,
        settings={"trials": trials, "box": list(box), "boxes": {k: list(v) for k, v in boxes.items()}},
    )
    if c.numeric:
        callables = {"p": c.p, "r": c.r}
        if c.q is not None:
            callables["q"] = c.q
        report.settings["mode"] = "numeric"
        for i, e in enumerate(S.equations):
            worst, used = _numeric_residual(e, callables, trials, seed + i, boxes, box, params)
            ok = worst <= tol and used > 0
            report.add_row(index=i, basis=S.basis[i], status="numeric", residual=worst, points=used, passed=ok)
            report.max_residual = max(report.max_residual, worst)
            report.passed &= ok
        return report

    known = S.params() | set(Sym(k, "param") for k in params)
    cand_params = set()
    for e in (c.p, c.q, c.r):
        if e is not None:
            cand_params |= {s for s in e.free_symbols() if s.kind == "param"}
    stray = cand_params - known
    if stray:
        raise UnboundParameterError(
            f"candidate uses parameters {sorted(s.name for s in stray)} unknown to the system"
        )
    binding = {"p": Lambda(FIELD_ARGS, c.p), "r": Lambda(FIELD_ARGS, c.r)}
    if c.q is not None:
        binding["q"] = Lambda(FIELD_ARGS, c.q)
    report.settings["mode"] = "symbolic"
    for i, e in enumerate(S.equations):
        sub = substitute(e, binding)
        status = "nonzero"
        worst = 0.0
        try:
            if is_zero_poly(to_poly(sub)):
                status = "exact"
        except (ExpansionLimitError, EvalDomainError):
            pass
        if status != "exact":
            worst, used = _numeric_residual(sub, {}, trials, seed + i, boxes, box, params)
            status = "numeric" if worst <= tol and used else "nonzero"
        ok = status != "nonzero"
        report.add_row(index=i, basis=S.basis[i], status=status, residual=worst, passed=ok)
        report.max_residual = max(report.max_residual, worst)
        report.passed &= ok
    return report
