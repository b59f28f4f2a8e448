"""Family detection for f(u) and recovery of the point-symmetry classification
through an affine ansatz p = a1*x + a2, q = b1*t + b2, r = c1*u + c2.
"""

from __future__ import annotations

import random

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .determining import FSpec, build_classical
from .errors import UnresolvedBranchError
from .expr import (
    ZERO,
    Add,
    Exp,
    Expr,
    Fn,
    Lambda,
    Log,
    Mul,
    Num,
    Pow,
    as_expr,
    diff,
    equiv,
    mul,
    normalize,
    param,
    parse,
    render,
    substitute,
    t,
    to_expr,
    to_poly,
    u,
    x,
)
from .expr.ratfun import primitive, quotient, split_content
from .expr.poly import (
    RAT,
    clear_denominators,
    coefficient_split,
    is_constant,
    is_zero_poly,
    padd,
    pmul,
    pneg,
)
from .jet import VectorField

TAGS = ("arbitrary", "power", "log", "exp", "quadratic")
_PARAM_ORDER = ("a", "b", "c", "d", "n", "k")


@dataclass(frozen=True)
class FFamily:
    """A classified nonlinearity.

    ``params`` holds the entries used by the tag (exact Exprs):
    power ``d*(a*u+b)^n + k*u + c``; log ``d*log(a*u+b) + k*u + c``;
    exp ``d*exp(a*u+b) + k*u + c``; quadratic ``d*u^2 + b*u + c``.
    ``arbitrary`` keeps the original expression in ``source``.
    """

    tag: str
    params: Mapping = field(default_factory=dict)
    source: Expr | None = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown family tag {self.tag!r}")
        object.__setattr__(self, "params", {k: normalize(as_expr(v)) for k, v in self.params.items()})
        self._validate()

    def _validate(self):
        p = self.params

        def nonzero(name):
            v = p.get(name)
            if v is None:
                raise ValueError(f"{self.tag} family needs parameter {name}")
            if v == ZERO:
                raise ValueError(f"{self.tag} family requires {name} != 0")

        if self.tag in ("power", "log", "exp"):
            nonzero("a")
            nonzero("d")
        if self.tag == "power":
            n = p.get("n")
            if n is None:
                raise ValueError("power family needs n")
            if n in (Num(0), Num(1)):
                raise ValueError("power family requires n not in {0, 1}")
        if self.tag == "quadratic":
            nonzero("d")

    def get(self, name: str, default=None):
        return self.params.get(name, default)

    def f_expr(self) -> Expr:
        p = {k: v for k, v in self.params.items()}
        if self.tag == "arbitrary":
            return self.source if self.source is not None else parse("f(u)")
        if self.tag == "quadratic":
            return normalize(p["d"] * u**2 + p.get("b", ZERO) * u + p.get("c", ZERO))
        k = p.get("k", Num(1))
        lin = p["a"] * u + p.get("b", ZERO)
        if self.tag == "power":
            core = lin ** p["n"]
        elif self.tag == "log":
            core = Log(lin)
        else:
            core = Exp(lin)
        return p["d"] * core + k * u + p.get("c", ZERO)

    def fspec(self) -> FSpec:
        if self.tag == "arbitrary" and self.source is None:
            return FSpec.symbolic()
        return FSpec.concrete(self.f_expr())

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "params": {k: render(self.params[k]) for k in _PARAM_ORDER if k in self.params},
            "f": render(self.f_expr()) if self.tag != "arbitrary" or self.source is not None else "f(u)",
        }


# ---------------------------------------------------------------------------
# detection


def _linear_in_u(e: Expr):
    """(a, b) with e == a*u + b and a free of u, else None."""
    a = diff(e, u)
    if u in a.free_symbols() or a == ZERO:
        return None
    b = normalize(e - a * u)
    if u in b.free_symbols():
        return None
    return a, b


def _match(e: Expr):
    terms = e.terms if isinstance(e, Add) else (e,)
    special = []
    k = ZERO
    c = ZERO
    for term in terms:
        factors = term.factors if isinstance(term, Mul) else (term,)
        dep = [f for f in factors if u in f.free_symbols()]
        rest = mul(*[f for f in factors if u not in f.free_symbols()])
        if not dep:
            c = c + rest
            continue
        if len(dep) != 1:
            return None
        F = dep[0]
        if F == u:
            k = k + rest
            continue
        if isinstance(F, Pow) and u not in F.exp.free_symbols():
            lin = (Num(1), ZERO) if F.base == u else _linear_in_u(F.base)
            if lin is None:
                return None
            special.append(("power", rest, lin, F.exp, F.base == u))
        elif isinstance(F, Log):
            lin = _linear_in_u(F.arg)
            if lin is None:
                return None
            special.append(("log", rest, lin, None, False))
        elif isinstance(F, Exp):
            lin = _linear_in_u(F.arg)
            if lin is None:
                return None
            special.append(("exp", rest, lin, None, False))
        else:
            return None
    if len(special) != 1:
        return None
    tag, d, (a, b), n, bare = special[0]
    k = normalize(k)
    c = normalize(c)
    if tag == "power" and bare and n == Num(2):
        return FFamily("quadratic", {"d": d, "b": k, "c": c})
    params = {"a": a, "b": b, "c": c, "d": d, "k": k}
    if tag == "power":
        params["n"] = n
    try:
        return FFamily(tag, params)
    except ValueError:
        return None


def detect_family(f) -> FFamily:
    """Classify f(u) into one of the families; ``arbitrary`` when none fits.

    The written form is matched first, the normal form second, and every
    match is confirmed by randomized equivalence with the reconstructed f.
    """
    f = as_expr(f)
    stray = [s.name for s in f.free_symbols() if s.kind != "param" and s != u]
    if stray:
        raise ValueError(f"f may depend only on u and parameters, found {sorted(stray)}")
    if any(isinstance(n, Fn) for n in _walk(f)):
        return FFamily("arbitrary", {}, None if _is_bare_f(f) else f)
    for candidate in (f, normalize(f)):
        fam = _match(candidate)
        if fam is not None and _confirm(f, fam.f_expr()):
            return fam
    return FFamily("arbitrary", {}, f)


def _is_bare_f(f: Expr) -> bool:
    return isinstance(f, Fn) and f.name == "f" and f.args == (u,) and not any(f.deriv)


def _walk(e: Expr):
    from .expr import iter_nodes

    return iter_nodes(e)


def _confirm(f: Expr, g: Expr) -> bool:
    try:
        return equiv(f, g, trials=20, tol=1e-9)
    except Exception:
        return False


def power_form(fam: FFamily) -> FFamily:
    """A quadratic family rewritten as the power family with n = 2.

    d*u^2 + b*u + c = d*(u + beta)^2 + u + (c - d*beta^2), beta = (b - 1)/(2d).
    Other families are returned unchanged.
    """
    if fam.tag != "quadratic":
        return fam
    p = fam.params
    beta = normalize((p.get("b", ZERO) - 1) / (2 * p["d"]))
    c = normalize(p.get("c", ZERO) - p["d"] * beta**2)
    return FFamily("power", {"a": Num(1), "b": beta, "c": c, "d": p["d"], "n": Num(2), "k": Num(1)})


# ---------------------------------------------------------------------------
# table generators


def translations() -> list:
    return [VectorField(Num(1), ZERO, ZERO), VectorField(ZERO, Num(1), ZERO)]


def generators_for(fam: FFamily) -> list:
    """Translations plus the scaling generator of the family when it exists.

    The scaling generator exists only when the coefficient of the bare u term
    equals 1; for quadratic f it is the power-family generator with n = 2.
    """
    gens = translations()
    p = fam.params
    if fam.tag == "quadratic":
        beta = normalize((p.get("b", ZERO) - 1) / (2 * p["d"]))
        gens.append(VectorField(x, 2 * t, normalize(-2 * (u + beta))))
        return gens
    if fam.tag not in ("power", "log", "exp"):
        return gens
    if normalize(p.get("k", Num(1))) != Num(1):
        return gens
    a, b = p["a"], p.get("b", ZERO)
    if fam.tag == "power":
        r = normalize(2 / (a * (1 - p["n"])) * (a * u + b))
    elif fam.tag == "log":
        r = normalize(2 / a * (a * u + b))
    else:
        r = normalize(-2 / a)
    gens.append(VectorField(x, 2 * t, r))
    return gens


# ---------------------------------------------------------------------------
# affine ansatz


_UNKNOWNS = tuple(param(n) for n in ("alpha1", "alpha2", "beta1", "beta2", "gamma1", "gamma2"))
# elimination order: the dependent coefficients first so that the scaling
# coefficient and the translations end up as free unknowns
_ELIM_ORDER = (2, 4, 5, 0, 1, 3)


@dataclass
class AnsatzResult:
    generators: list
    conditions: list
    equations: int

    def to_dict(self) -> dict:
        return {
            "generators": [g.render() for g in self.generators],
            "conditions": [render(c) + " != 0" for c in self.conditions],
            "linear_equations": self.equations,
        }


def _is_functional(en) -> bool:
    atom = en[2]
    fs = atom.free_symbols()
    if en[1] != RAT:
        fs = fs | en[3].free_symbols()
    if isinstance(atom, Fn):
        return True
    return any(s.kind in ("var", "jet") for s in fs)


def _is_unknown(en) -> bool:
    return en[1] == RAT and en[2] in _UNKNOWNS


def _linear_rows(S) -> list:
    a1, a2, b1, b2, g1, g2 = _UNKNOWNS
    binding = {
        "p": Lambda((x, t, u), a1 * x + a2),
        "q": Lambda((x, t, u), b1 * t + b2),
        "r": Lambda((x, t, u), g1 * u + g2),
    }
    rows = []
    for e in S.equations:
        P = clear_denominators(to_poly(substitute(e, binding)))
        for coeff in coefficient_split(P, _is_functional).values():
            row = [dict() for _ in _UNKNOWNS]
            for mono, part in coefficient_split(coeff, _is_unknown).items():
                if len(mono) != 1 or mono[0][3] != 1:
                    raise UnresolvedBranchError("ansatz produced a non-linear condition")
                row[_UNKNOWNS.index(mono[0][2])] = part
            if any(row):
                rows.append(row)
    return rows


def _pivot_rank(p) -> tuple:
    """Prefer constant pivots, then monomials, then the shortest expression."""
    if is_constant(p) or not to_expr(p).free_symbols():
        return (0, 0)
    return (1 if len(p) == 1 else 2, len(p))


def _nullspace(rows: list) -> tuple[list, list]:
    """Fraction-free Gauss-Jordan elimination.

    Returns the basis vectors (as Exprs, each with a 1 in its free unknown)
    and the non-constant pivots, whose non-vanishing the result assumes.
    """
    n = len(_UNKNOWNS)
    rows = [primitive(list(r)) for r in rows]
    pivots = []
    conditions = []
    r0 = 0
    for col in _ELIM_ORDER:
        cands = [i for i in range(r0, len(rows)) if rows[i][col] and not is_zero_poly(rows[i][col])]
        if not cands:
            continue
        best = min(cands, key=lambda i: _pivot_rank(rows[i][col]))
        rows[r0], rows[best] = rows[best], rows[r0]
        piv = rows[r0][col]
        if _pivot_rank(piv)[0]:
            if any(isinstance(en[2], Fn) for m in piv for en in m):
                raise UnresolvedBranchError("pivot depends on the unknown function f")
            syms, rest = split_content(piv)
            conditions += syms
            if not is_constant(rest):
                conditions.append(to_expr(rest))
        for i in range(len(rows)):
            if i == r0 or not rows[i][col]:
                continue
            factor = rows[i][col]
            new = [padd(pmul(piv, rows[i][j]), pneg(pmul(factor, rows[r0][j]))) for j in range(n)]
            rows[i] = primitive([clear_denominators(v) if v else v for v in new])
        pivots.append(col)
        r0 += 1
        rows = rows[:r0] + [r for r in rows[r0:] if any(v and not is_zero_poly(v) for v in r)]
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fcol in free:
        vec = [ZERO] * n
        vec[fcol] = Num(1)
        for ri, pc in enumerate(pivots):
            coeff = rows[ri][fcol]
            if coeff and not is_zero_poly(coeff):
                vec[pc] = quotient(pneg(coeff), rows[ri][pc])
        basis.append(vec)
    return basis, _dedupe(conditions)


def _dedupe(conds: list) -> list:
    out = []
    for c in conds:
        if c not in out:
            out.append(c)
    return out


def _field(v: list) -> VectorField:
    a1, a2, b1, b2, g1, g2 = v
    return VectorField(normalize(a1 * x + a2), normalize(b1 * t + b2), normalize(g1 * u + g2))


def ansatz_solve_detail(f=None) -> AnsatzResult:
    spec = f if isinstance(f, FSpec) else (FSpec.symbolic() if f is None else FSpec.concrete(f))
    S = build_classical(spec)
    rows = _linear_rows(S)
    basis, conditions = _nullspace(rows)
    fields = [_field(v) for v in basis]
    # translations first, then generators with a scaling part
    fields.sort(key=lambda V: (normalize(diff(V.p, x)) != ZERO, V.render()))
    if spec.expr is not None:
        conditions = [c for c in conditions if not _removable(spec.expr, c, fields)]
    return AnsatzResult(fields, conditions, len(rows))


def _removable(f: Expr, cond: Expr, fields: list) -> bool:
    """True when the pivot condition ``cond != 0`` was an artefact of the
    elimination: solving again on ``cond == 0`` gives the same generators."""
    for s in sorted(cond.free_symbols(), key=lambda s: s.key):
        slope = diff(cond, s)
        if slope.free_symbols():
            continue
        value = normalize(s - cond / slope)
        try:
            special = [
                VectorField(*(normalize(substitute(c, {s: value})) for c in (V.p, V.q, V.r)))
                for V in fields
            ]
            again = ansatz_solve_detail(normalize(substitute(f, {s: value})))
            return same_span(again.generators, special)
        except (ZeroDivisionError, ArithmeticError, ValueError):
            return False
    return False


def ansatz_solve(f=None) -> list:
    """All affine-ansatz symmetries of the classical system for ``f``.

    Generators with a nonzero x*d/dx part are scaled so that part is x*d/dx.
    """
    return ansatz_solve_detail(f).generators


def _coefficients(V: VectorField) -> list:
    out = []
    for c, var in ((V.p, x), (V.q, t), (V.r, u)):
        c = normalize(c)
        lin = diff(c, var)
        out += [lin, normalize(c - lin * var)]
    return out


def _rank(vectors: list) -> int:
    rows = [list(v) for v in vectors]
    rank = 0
    for col in range(len(rows[0]) if rows else 0):
        piv = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][col] != 0:
                f = rows[i][col] / rows[rank][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def same_span(A: list, B: list, draws: int = 3, seed: int = 20240607) -> bool:
    """True when two lists of affine fields span the same space.

    Parameters are replaced by random rationals and the ranks of A, B and
    A+B are compared exactly at each draw.
    """
    va = [_coefficients(V) for V in A]
    vb = [_coefficients(V) for V in B]
    names = sorted({s for v in va + vb for e in v for s in e.free_symbols()}, key=lambda s: s.key)
    if any(s.kind != "param" for s in names):
        raise ValueError("affine fields expected")
    rng = random.Random(seed)
    for _ in range(draws if names else 1):
        point = {s: Num(Fraction(rng.randint(7, 97), rng.randint(3, 31))) for s in names}

        def num(e):
            v = normalize(substitute(e, point)) if names else e
            if not isinstance(v, Num):
                raise ValueError(f"coefficient {render(e)} is not rational at the sample point")
            return v.value

        ma = [[num(e) for e in v] for v in va]
        mb = [[num(e) for e in v] for v in vb]
        ra, rb = _rank(ma), _rank(mb)
        if ra != rb or _rank(ma + mb) != ra:
            return False
    return True
