"""Similarity reductions: travelling waves and the scaling reductions of the
power, log and exp families, with the reduced ODEs they produce.

The unknown profile is the function ``h`` of the similarity variable ``z``;
its derivatives appear as ``h'(z)``, ``h''(z)`` and so on, so ``diff(e, z)``
is the total z-derivative of an ODE expression.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .classify import FFamily, detect_family, power_form
from .errors import SeparationError
from .expr import (
    ZERO,
    Expr,
    Fn,
    Lambda,
    Num,
    as_expr,
    diff,
    equiv_detail,
    exp,
    fn,
    log,
    normalize,
    param,
    parse,
    power,
    render,
    substitute,
    t,
    to_poly,
    u,
    x,
    z,
)
from .expr.poly import RAT, SYMEXP
from .report import Report

H = "h"
LAMBDA = param("lambda")
K1, K2 = param("k1"), param("k2")


def hfun(order: int = 0, name: str = H) -> Fn:
    """The profile derivative h^(order)(z)."""
    return fn(name, z, deriv=(order,))


# printed reduced ODEs under test, by family; for the power family k = n*d*a^n
PRINTED_ODE = {
    "power": "h''''(z) + (z^2/4 + k*h(z)^(n-1))*h''(z) + k*(n-1)*h(z)^(n-2)*h'(z)^2"
    " + (z/(n-1) + 3*z/4)*h'(z) + n*h(z)/(n-1)^2",
    "log": "4*h(z)^2*h''''(z) + 4*d*(h(z)*h''(z) - h'(z)^2) + h(z)^2*(z^2*h''(z) - z*h'(z))",
    "exp": "4*g(z)*g'''(z) + z^2*g'(z)^2 + 2*z^2 - z*g(z) + k1*z + k2 - d*exp(-g'(z))",
}

# twice-integrated exp-family ODE in g (h = exp(g')) as it follows from the
# scaling ansatz; compared against the printed form in check_printed_ode
EXP_INTEGRATED = "4*g'''(z) + z^2*g'(z) - z*g(z) - 2*z^2 - 4*a*d*exp(b)*exp(-g'(z)) - k1*z - k2"

PRINTED_FIRST_INTEGRALS = {
    2: ("(z^3/4 + h(z)*k*z)*h'(z) + h(z)*z^2 + z*h'''(z) - h(z)^2*k/2 - h''(z)", "z"),
    3: ("(z^2/4 + h(z)^2*k)*h'(z) + 3*h(z)*z/4 + h'''(z)", "1"),
    -1: ("(z^2/4 + k/h(z)^2)*h'(z) - h(z)*z/4 + h'''(z)", "1"),
}


@dataclass
class Reduction:
    """A similarity reduction u(x, t) = U(x, t, h(z)) with z = z(x, t).

    ``ode`` is the reduced equation (an expression that must vanish),
    monic in h''''. With ``separation`` the t-power p and ``lead`` the
    removed h'''' coefficient, PDE(U) = t^p * lead * ode.
    """

    kind: str
    z: Expr
    ansatz: Expr
    f: Expr
    params: dict = field(default_factory=dict)
    family: FFamily | None = None
    ode: Expr | None = None
    separation: Expr = ZERO
    lead: Expr = Num(1)
    integrated: Expr | None = None
    checks: dict = field(default_factory=dict)

    @property
    def separation_factor(self) -> Expr:
        return normalize(power(t, self.separation))

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "z": render(self.z),
            "ansatz": render(self.ansatz),
            "f": render(self.f),
            "params": {k: render(as_expr(v)) for k, v in sorted(self.params.items())},
            "ode": render(self.ode) if self.ode is not None else None,
            "separation_factor": render(self.separation_factor),
            "checks": dict(sorted(self.checks.items())),
        }
        if self.integrated is not None:
            out["integrated"] = render(self.integrated)
        return out


def _f_expr(f) -> Expr:
    if f is None:
        return fn("f", u)
    if isinstance(f, FFamily):
        return f.f_expr()
    return as_expr(f)


def _pde_on_ansatz(U: Expr, f: Expr, zx: Expr, zt: Expr) -> Expr:
    """u_tt - u_xx + (f(u) + u_xx)_xx for u = U(x, t, h(z(x, t)))."""

    def Dx(e):
        return normalize(diff(e, x) + zx * diff(e, z))

    def Dt(e):
        return normalize(diff(e, t) + zt * diff(e, z))

    ux = Dx(U)
    uxx = Dx(ux)
    fu = substitute(f, {u: U})
    return normalize(Dt(Dt(U)) - uxx + Dx(Dx(fu + uxx)))


def leading_coefficient(ode: Expr, order: int = 4, name: str = H) -> Expr:
    """Coefficient of the highest derivative h^(order)(z) in ode."""
    mark = param("lead_")
    return diff(_swap(ode, hfun(order, name), mark), mark)


def _swap(e: Expr, atom: Fn, mark) -> Expr:
    """Replace one unknown-function application by a plain symbol."""
    from .expr.calculus import rebuild

    memo: dict = {}

    def walk(n):
        if n == atom:
            return mark
        if not n.children:
            return n
        hit = memo.get(id(n))
        if hit is not None:
            return hit
        out = rebuild(n, [walk(c) for c in n.children])
        memo[id(n)] = out
        return out

    return walk(e)


def monic(ode: Expr, order: int = 4, name: str = H) -> Expr:
    """ode divided by its leading coefficient when that is nonzero."""
    lead = leading_coefficient(ode, order, name)
    if lead == ZERO:
        return ode
    return normalize(ode / lead)


def _t_exponents(e: Expr) -> list:
    found = []
    for mono in to_poly(e):
        total = ZERO
        for en in mono:
            if en[2] != t:
                continue
            if en[1] == RAT:
                total = total + Num(en[3])
            elif en[1] == SYMEXP:
                total = total + en[3]
        total = normalize(total)
        if total not in found:
            found.append(total)
    return found


def _separate(E: Expr, seed: int) -> tuple[Expr, Expr]:
    """Split E(t, z, h...) as t^p * G(z, h...); returns (p, G).

    Candidate exponents are the t-powers present in the normal form. A
    candidate is accepted when E and t^p * E|_{t=1} agree at random points.
    """
    if t not in E.free_symbols():
        return ZERO, E
    G = normalize(substitute(E, {t: Num(1)}))
    if G == ZERO:
        raise SeparationError("reduced expression vanishes at t = 1")
    for p in sorted(_t_exponents(E), key=lambda c: c.key):
        res = equiv_detail(E, power(t, p) * G, trials=12, tol=1e-9, seed=seed)
        if res.equal:
            return p, G
    raise SeparationError("substituted PDE does not factor as a power of t times a z-only expression")


def travelling_wave(lam=LAMBDA, f=None) -> Reduction:
    """z = x - lam*t, u = h(z).

    ``integrated`` holds h'' + (lam^2 - 1) h + f(h) - k1 z - k2, whose second
    z-derivative is the reduced ODE.
    """
    lam = as_expr(lam)
    fam = f if isinstance(f, FFamily) else None
    fx = _f_expr(f)
    red = Reduction("travelling_wave", normalize(x - lam * t), hfun(0), fx, {"lambda": lam}, fam)
    fh = substitute(fx, {u: hfun(0)})
    red.integrated = normalize(hfun(2) + (lam**2 - 1) * hfun(0) + fh - K1 * z - K2)
    _derive(red)
    return red


def scaling(fam, seed: int = 20240607) -> Reduction:
    """The scaling reduction z = x/sqrt(t) of the power, log or exp family."""
    if not isinstance(fam, FFamily):
        fam = detect_family(fam)
    fam = power_form(fam)
    if fam.tag not in ("power", "log", "exp"):
        raise ValueError(f"scaling reduction needs a power, log or exp family, got {fam.tag}")
    a, b = fam.params["a"], fam.get("b", ZERO)
    h0 = hfun(0)
    if fam.tag == "power":
        U = power(t, 1 / (1 - fam.params["n"])) * h0 - b / a
    elif fam.tag == "log":
        U = t * h0 - b / a
    else:
        U = -log(t * h0) / a
    red = Reduction(
        "scaling", normalize(x / power(t, Fraction(1, 2))), normalize(U), fam.f_expr(),
        dict(fam.params), fam,
    )
    _derive(red, seed)
    return red


def derive_ode(red: Reduction, f=None, seed: int = 20240607) -> Expr:
    """The monic z-only ODE of a reduction, optionally for a different f.

    The result is also stored on ``red`` together with its separation factor.
    """
    if f is not None:
        red.f = _f_expr(f)
        red.family = f if isinstance(f, FFamily) else red.family
    return _derive(red, seed).ode


def _derive(red: Reduction, seed: int = 20240607) -> Reduction:
    zx = diff(red.z, x)
    zt = diff(red.z, t)
    U = red.ansatz
    E = _pde_on_ansatz(U, red.f, zx, zt)
    if red.kind == "scaling":
        # x = z*sqrt(t) on the reduced variables
        E = normalize(substitute(E, {x: z * power(t, Fraction(1, 2))}))
    else:
        E = normalize(substitute(E, {x: z + red.params["lambda"] * t}))
    p, G = _separate(E, seed)
    if x in G.free_symbols():
        raise SeparationError("reduced ODE still depends on x")
    red.separation = p
    red.lead = leading_coefficient(G)
    red.ode = monic(G)
    red.checks["separation"] = True
    return red


def verify_ansatz(red: Reduction, generator, seed: int = 20240607) -> Report:
    """Check that z is an invariant of the generator and that the ansatz
    satisfies its surface condition p*u_x + q*u_t - r = 0."""
    V = generator
    zx, zt = diff(red.z, x), diff(red.z, t)
    vz = normalize(V.p * zx + V.q * zt)
    U = red.ansatz
    Ux = normalize(diff(U, x) + zx * diff(U, z))
    Ut = normalize(diff(U, t) + zt * diff(U, z))
    surf = normalize(V.p * Ux + V.q * Ut - substitute(V.r, {u: U}))
    rep = Report("ansatz invariance", True, tolerance=1e-9, seed=seed)
    for label, e in (("generator applied to z", vz), ("surface condition", surf)):
        r = equiv_detail(e, ZERO, trials=20, tol=1e-9, seed=seed)
        rep.add_row(check=label, status="exact" if r.exact else ("numeric" if r.equal else "nonzero"),
                    max_residual=r.max_error)
        rep.passed = rep.passed and r.equal
        rep.max_residual = max(rep.max_residual, r.max_error)
    return rep


# ---------------------------------------------------------------------------
# printed reduced ODEs


def _family_for(tag: str, params: dict) -> FFamily:
    if tag not in PRINTED_ODE:
        raise ValueError(f"no printed ODE for family {tag!r}")
    keep = {k: v for k, v in params.items() if k in ("a", "b", "c", "d", "n")}
    keep.setdefault("a", param("a"))
    keep.setdefault("d", param("d"))
    keep.setdefault("b", param("b"))
    keep.setdefault("c", param("c"))
    if tag == "power":
        keep.setdefault("n", param("n"))
    return FFamily(tag, {**keep, "k": Num(1)})


def _compare(label: str, derived: Expr, printed: Expr, seed: int, trials: int, tol: float, **settings) -> Report:
    res = equiv_detail(derived, printed, trials=trials, tol=tol, seed=seed)
    rep = Report(label, res.equal, res.max_error, tol, seed=seed, settings={"trials": trials, **settings})
    rep.add_row(
        derived=render(derived),
        printed=render(printed),
        status="exact" if res.exact else ("agree" if res.equal else "mismatch"),
        trials=res.trials,
        max_relative_difference=res.max_error,
        worst_point=res.worst_point,
    )
    if not res.equal:
        rep.notes.append("printed form disagrees with the derived reduction")
    return rep


def check_printed_ode(tag: str, params: dict | None = None, seed: int = 20240607, trials: int = 50,
                 tol: float = 1e-9) -> Report:
    """Compare the derived scaling-reduction ODE with the printed one.

    Both sides are made monic. For the exp family the derived ODE is rewritten with
    h = exp(g'), and compared against the second z-derivative of the printed
    twice-integrated form, both monic in g^(5).
    """
    params = {k: as_expr(v) for k, v in (params or {}).items()}
    fam = _family_for(tag, params)
    red = scaling(fam, seed=seed)
    if tag in ("power", "log"):
        binding = {"n": fam.params.get("n", ZERO), "d": fam.params["d"], "a": fam.params["a"]}
        k = params.get("k")
        if k is None and tag == "power":
            k = normalize(binding["n"] * binding["d"] * power(binding["a"], binding["n"]))
        printed = parse(PRINTED_ODE[tag])
        printed = substitute(printed, {**binding, **({"k": k} if k is not None else {})})
        rep = _compare(f"printed {tag} ODE", red.ode, monic(normalize(printed)), seed, trials, tol)
    else:
        g = fn("g", z, deriv=(1,))
        rewritten = substitute(red.ode, {H: Lambda((z,), exp(g))})
        derived = monic(normalize(rewritten), 5, "g")
        printed = substitute(parse(PRINTED_ODE["exp"]), {"d": fam.params["d"]})
        target = monic(diff(printed, z, 2), 5, "g")
        rep = _compare("printed exp ODE", derived, target, seed, trials, tol, substitution="h = exp(g')")
        own = substitute(parse(EXP_INTEGRATED), {k: fam.params[k] for k in ("a", "b", "d")})
        alt = equiv_detail(derived, monic(diff(own, z, 2), 5, "g"), trials=trials, tol=tol, seed=seed)
        rep.settings["integrated_form"] = render(normalize(own))
        rep.settings["integrated_form_matches"] = alt.equal
    rep.settings["family"] = fam.to_dict()
    rep.settings["derived_ode"] = render(red.ode)
    return rep


def check_first_integral(ode, candidate, multiplier=1, seed: int = 20240607, trials: int = 50,
                         tol: float = 1e-9) -> bool:
    """True iff d/dz(candidate) equals multiplier * ode at random points."""
    return first_integral_report(ode, candidate, multiplier, seed, trials, tol).passed


def first_integral_report(ode, candidate, multiplier=1, seed: int = 20240607, trials: int = 50,
                          tol: float = 1e-9) -> Report:
    ode, candidate, multiplier = as_expr(ode), as_expr(candidate), as_expr(multiplier)
    lhs = diff(candidate, z)
    rhs = normalize(multiplier * ode)
    return _compare("first integral", lhs, rhs, seed, trials, tol, multiplier=render(multiplier))


def printed_first_integral(n: int, k=None) -> tuple[Expr, Expr, Expr]:
    """(printed power-family ODE at this n, printed integrated form, multiplier) with k free unless given."""
    text, mult = PRINTED_FIRST_INTEGRALS[n]
    bind = {"n": Num(n)}
    if k is not None:
        bind["k"] = as_expr(k)
    ode = normalize(substitute(parse(PRINTED_ODE["power"]), bind))
    cand = normalize(substitute(parse(text), bind))
    return ode, cand, parse(mult)
