"""Total derivatives and prolongation of point vector fields.

Multi-indices are pairs ``(i, j)``: i derivatives in x and j in t.  The
jet coordinate ``u_{x^i t^j}`` is ``jet(i, j)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import JetOrderError
from .expr import Expr, Fn, Sym, as_expr, jet, normalize, parse, render, substitute, t, to_expr, to_poly, u, x
from .expr.nodes import MAX_JET_ORDER, ZERO
from .expr.poly import RAT, padd, pdiff, pmul, pneg, Poly

_DIRS = {"x": (1, 0), "t": (0, 1)}
_VARS = {"x": x, "t": t}


def _direction(d) -> str:
    if isinstance(d, Sym):
        d = d.name
    if d not in _DIRS:
        raise ValueError(f"total derivative direction must be 'x' or 't', got {d!r}")
    return d


def poly_jets(p: Poly) -> set:
    """Jet coordinates occurring anywhere in ``p`` (including function arguments)."""
    out = set()
    seen = set()
    for m in p:
        for en in m:
            a = en[2]
            if en[1] == RAT and isinstance(a, Sym):
                if a.kind == "jet":
                    out.add(a)
                continue
            if a in seen:
                continue
            seen.add(a)
            out.update(s for s in a.free_symbols() if s.kind == "jet")
            if en[1] != RAT:
                out.update(s for s in en[3].free_symbols() if s.kind == "jet")
    return out


def total_derivative_poly(p: Poly, direction: str) -> Poly:
    di, dj = _DIRS[direction]
    parts = [pdiff(p, _VARS[direction])]
    for s in sorted(poly_jets(p), key=lambda s: s.key):
        i, j = s.index
        if i + j + 1 > MAX_JET_ORDER:
            raise JetOrderError(
                f"D_{direction} of {s.name} exceeds maximum jet order {MAX_JET_ORDER}"
            )
        d = pdiff(p, s)
        if d:
            parts.append(pmul(d, to_poly(jet(i + di, j + dj))))
    return padd(*parts)


def total_derivative(e, direction) -> Expr:
    """D_x or D_t of an expression on the jet space (normal form)."""
    direction = _direction(direction)
    return to_expr(total_derivative_poly(to_poly(as_expr(e)), direction))


def total_derivative_multi(p: Poly, i: int, j: int) -> Poly:
    for _ in range(i):
        p = total_derivative_poly(p, "x")
    for _ in range(j):
        p = total_derivative_poly(p, "t")
    return p


@dataclass(frozen=True)
class VectorField:
    """Generator p*d/dx + q*d/dt + r*d/du with coefficients in (x, t, u)."""

    p: Expr
    q: Expr
    r: Expr

    def __post_init__(self):
        for name in ("p", "q", "r"):
            e = as_expr(getattr(self, name))
            object.__setattr__(self, name, e)
            bad = [s.name for s in e.free_symbols() if s.kind == "jet" and s.order >= 1]
            if bad:
                raise ValueError(f"coefficient {name} depends on derivative jets {sorted(bad)}")

    @classmethod
    def parse(cls, text: str) -> "VectorField":
        """Read generator notation such as ``"x*dx + 2*t*dt - (2/a)*du"``."""
        e = parse(text)
        markers = {name: Sym(name, "param") for name in ("dx", "dt", "du")}
        coeff = {}
        for name in markers:
            binding = {m: (1 if m == name else 0) for m in markers}
            coeff[name] = normalize(substitute(e, binding))
        rebuilt = sum(
            (coeff[n] * markers[n] for n in markers), start=ZERO
        )
        if normalize(e - rebuilt) != ZERO:
            raise ValueError("generator must be linear in the markers dx, dt, du")
        return cls(coeff["dx"], coeff["dt"], coeff["du"])

    def render(self) -> str:
        parts = []
        for coef, marker in ((self.p, "dx"), (self.q, "dt"), (self.r, "du")):
            c = normalize(coef)
            if c == ZERO:
                continue
            parts.append(f"({render(c)})*{marker}")
        return " + ".join(parts) if parts else "0"

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(
            normalize(self.p + other.p), normalize(self.q + other.q), normalize(self.r + other.r)
        )

    def scale(self, c) -> "VectorField":
        return VectorField(normalize(self.p * c), normalize(self.q * c), normalize(self.r * c))

    def normalized(self) -> "VectorField":
        return VectorField(normalize(self.p), normalize(self.q), normalize(self.r))

    def as_dict(self) -> dict:
        return {k: render(normalize(getattr(self, k))) for k in ("p", "q", "r")}


def symbolic_field(q_one: bool = False) -> VectorField:
    """Field with unknown coefficient functions p(x,t,u), q(x,t,u), r(x,t,u)."""
    args = (x, t, u)
    q = as_expr(1) if q_one else Fn("q", args)
    return VectorField(Fn("p", args), q, Fn("r", args))


def _closure(indices: Iterable[tuple]) -> list:
    """All multi-indices on the recursion paths to ``indices``, in build order."""
    need = set()
    for i, j in indices:
        while (i, j) != (0, 0):
            need.add((i, j))
            if j > 0:
                j -= 1
            else:
                i -= 1
    return sorted(need, key=lambda ij: (ij[0] + ij[1], ij))


@dataclass
class ProlongedField:
    base: VectorField
    eta: dict  # (i, j) -> Poly

    def coefficient(self, i: int, j: int) -> Expr:
        return to_expr(self.eta[(i, j)])

    def indices(self) -> list:
        return sorted(self.eta, key=lambda ij: (ij[0] + ij[1], ij))


def prolong(
    V: VectorField,
    order: int = 4,
    method: str = "recursive",
    indices: Iterable[tuple] | None = None,
) -> ProlongedField:
    """Prolong ``V`` to jets of total order ``order`` (at most 4).

    ``method`` is ``"recursive"`` (eta^{J,x} = D_x eta^J - (D_x p) u_{J,x}
    - (D_x q) u_{J,t}) or ``"characteristic"`` (eta^J = D_J Q + p u_{J,x}
    + q u_{J,t} with Q = r - p u_x - q u_t).  ``indices`` restricts the
    computation to the listed multi-indices (recursive paths included).
    """
    if not 0 <= order <= 4:
        raise ValueError(f"prolongation order must be between 0 and 4, got {order}")
    if indices is None:
        wanted = [(i, n - i) for n in range(1, order + 1) for i in range(n, -1, -1)]
    else:
        wanted = [tuple(ij) for ij in indices]
        if any(sum(ij) > order for ij in wanted):
            raise ValueError("requested multi-index exceeds the prolongation order")
    P = to_poly(V.p)
    Q = to_poly(V.q)
    R = to_poly(V.r)
    eta = {(0, 0): R}
    if method == "recursive":
        Dp = {"x": total_derivative_poly(P, "x"), "t": total_derivative_poly(P, "t")}
        Dq = {"x": total_derivative_poly(Q, "x"), "t": total_derivative_poly(Q, "t")}
        for i, j in _closure(wanted):
            if j > 0:
                prev, d = (i, j - 1), "t"
            else:
                prev, d = (i - 1, j), "x"

            pi, pj = prev
            eta[(i, j)] = padd(
                total_derivative_poly(eta[prev], d),
                pneg(pmul(Dp[d], to_poly(jet(pi + 1, pj)))),
                pneg(pmul(Dq[d], to_poly(jet(pi, pj + 1)))),
            )
    elif method == "characteristic":
        char = padd(R, pneg(pmul(P, to_poly(jet(1, 0)))), pneg(pmul(Q, to_poly(jet(0, 1)))))
        cache = {(0, 0): char}
        for i, j in _closure(wanted):
            if j > 0:
                cache[(i, j)] = total_derivative_poly(cache[(i, j - 1)], "t")
            else:
                cache[(i, j)] = total_derivative_poly(cache[(i - 1, j)], "x")
        for ij in wanted:
            i, j = ij
            eta[ij] = padd(
                cache[ij],
                pmul(P, to_poly(jet(i + 1, j))),
                pmul(Q, to_poly(jet(i, j + 1))),
            )
    else:
        raise ValueError(f"unknown prolongation method {method!r}")
    return ProlongedField(V, eta)


def apply_prolonged_poly(PV: ProlongedField, F: Poly) -> Poly:
    parts = [pmul(to_poly(PV.base.p), pdiff(F, x)), pmul(to_poly(PV.base.q), pdiff(F, t))]
    for s in sorted(poly_jets(F), key=lambda s: s.key):
        if s.order > 4:
            raise JetOrderError(f"{s.name} exceeds the prolongation order")
        dF = pdiff(F, s)
        if not dF:
            continue
        if s.index not in PV.eta:
            raise KeyError(f"prolongation lacks the coefficient for {s.name}")
        parts.append(pmul(PV.eta[s.index], dF))
    return padd(*parts)


def apply_prolonged(PV: ProlongedField, F) -> Expr:
    """pr V (F) = p F_x + q F_t + sum_J eta^J dF/du_J."""
    return to_expr(apply_prolonged_poly(PV, to_poly(as_expr(F))))


def required_indices(F: Poly) -> list:
    return sorted({s.index for s in poly_jets(F) if s.order >= 1})
