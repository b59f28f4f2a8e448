"""Multivariate polynomial GCD over the rationals, used to cancel quotients.

Only polynomials whose atoms are plain symbols with non-negative integer
exponents (after removing monomial content) are handled; anything else is
left to the caller as an opaque quotient.
"""

from __future__ import annotations

from fractions import Fraction

from .nodes import Expr, Num, Sym, mul, power
from .poly import PLAIN, RAT, POLY_ONE, to_expr, to_poly

MP = dict  # exponent tuple -> Fraction


def _vars_of(*polys) -> list | None:
    out = set()
    for p in polys:
        for m in p:
            for en in m:
                if en[1] != RAT or en[4] != PLAIN or not isinstance(en[2], Sym):
                    return None
                if en[3].denominator != 1:
                    return None
                out.add(en[2])
    return sorted(out, key=lambda s: s.key)


def _to_mp(p, variables: list) -> MP:
    idx = {v: i for i, v in enumerate(variables)}
    out = {}
    for m, c in p.items():
        e = [0] * len(variables)
        for en in m:
            e[idx[en[2]]] = int(en[3])
        out[tuple(e)] = c
    return out


def _from_mp(a: MP, variables: list) -> Expr:
    from .nodes import add

    terms = []
    for e, c in a.items():
        terms.append(mul(Num(c), *[power(v, Num(k)) for v, k in zip(variables, e) if k]))
    return add(*terms)


def _shift(a: MP) -> tuple[MP, tuple]:
    """Divide out the monomial content (componentwise minimum exponent)."""
    if not a:
        return a, ()
    n = len(next(iter(a)))
    low = tuple(min(e[i] for e in a) for i in range(n))
    return {tuple(x - y for x, y in zip(e, low)): c for e, c in a.items()}, low


def _add(a: MP, b: MP, sign: int = 1) -> MP:
    out = dict(a)
    for e, c in b.items():
        v = out.get(e, Fraction(0)) + sign * c
        if v:
            out[e] = v
        else:
            out.pop(e, None)
    return out


def _mul(a: MP, b: MP) -> MP:
    out: dict = {}
    for e1, c1 in a.items():
        for e2, c2 in b.items():
            e = tuple(x + y for x, y in zip(e1, e2))
            v = out.get(e, Fraction(0)) + c1 * c2
            if v:
                out[e] = v
            else:
                out.pop(e, None)
    return out


def _lead(a: MP):
    e = max(a)
    return e, a[e]


def _div_exact(a: MP, b: MP) -> MP | None:
    """a / b when b divides a, else None (lexicographic division)."""
    if not b:
        raise ZeroDivisionError
    q: dict = {}
    r = dict(a)
    eb, cb = _lead(b)
    while r:
        er, cr = _lead(r)
        diff = tuple(x - y for x, y in zip(er, eb))
        if any(d < 0 for d in diff):
            return None
        term = {diff: cr / cb}
        q = _add(q, term)
        r = _add(r, _mul(term, b), -1)
    return q


def _degree(a: MP, k: int) -> int:
    return max((e[k] for e in a), default=-1)


def _coeffs(a: MP, k: int) -> dict:
    out: dict = {}
    for e, c in a.items():
        d = e[k]
        key = e[:k] + (0,) + e[k + 1 :]
        out.setdefault(d, {})[key] = c
    return out


def _monic(a: MP) -> MP:
    if not a:
        return a
    _, c = _lead(a)
    return {e: v / c for e, v in a.items()}


def _content(a: MP, k: int, n: int) -> MP:
    g: MP = {}
    for c in _coeffs(a, k).values():
        g = _gcd(g, c, k + 1, n)
        if g == {(0,) * n: Fraction(1)}:
            break
    return g


def _prem(a: MP, b: MP, k: int) -> MP:
    db = _degree(b, k)
    lb = _coeffs(b, k)[db]
    r = a
    while r and _degree(r, k) >= db:
        dr = _degree(r, k)
        lr = _coeffs(r, k)[dr]
        shift = tuple(dr - db if i == k else 0 for i in range(len(next(iter(b)))))
        r = _add(_mul(lb, r), _mul(_mul(lr, {shift: Fraction(1)}), b), -1)
    return r


def _gcd(a: MP, b: MP, k: int, n: int) -> MP:
    if not a:
        return _monic(b)
    if not b:
        return _monic(a)
    one = {(0,) * n: Fraction(1)}
    if k >= n:
        return one
    if _degree(a, k) == 0 and _degree(b, k) == 0:
        return _gcd(a, b, k + 1, n)
    ca, cb = _content(a, k, n), _content(b, k, n)
    pa, pb = _div_exact(a, ca), _div_exact(b, cb)
    g_c = _gcd(ca, cb, k + 1, n)
    if _degree(pa, k) < _degree(pb, k):
        pa, pb = pb, pa
    while pb and _degree(pb, k) > 0:
        r = _prem(pa, pb, k)
        if not r:
            break
        pa, pb = pb, _div_exact(r, _content(r, k, n))
    if pb and _degree(pb, k) == 0:
        g = one
    else:
        g = pb
    return _monic(_mul(g_c, g))


def cancel(num, den) -> tuple:
    """Cancel common factors of two polynomials (normal-form dicts).

    Returns ``(num', den')`` with ``num/den == num'/den'``.  Falls back to the
    inputs when they contain atoms other than integer powers of symbols.
    """
    if not num:
        return num, POLY_ONE
    variables = _vars_of(num, den)
    if variables is None:
        return num, den
    a, la = _shift(_to_mp(num, variables))
    b, lb = _shift(_to_mp(den, variables))
    low = tuple(min(x, y) for x, y in zip(la, lb))
    la = tuple(x - y for x, y in zip(la, low))
    lb = tuple(x - y for x, y in zip(lb, low))
    g = _gcd(a, b, 0, len(variables)) if variables else {(): Fraction(1)}
    a = _div_exact(a, g) or a
    b = _div_exact(b, g) or b
    a = _mul(a, {la: Fraction(1)}) if variables else a
    b = _mul(b, {lb: Fraction(1)}) if variables else b
    _, lc = _lead(b)
    a = {e: c / lc for e, c in a.items()}
    b = {e: c / lc for e, c in b.items()}
    return to_poly(_from_mp(a, variables)), to_poly(_from_mp(b, variables))


def quotient(num, den) -> Expr:
    """Normal form of num/den after cancelling common factors."""
    from .poly import pmul, pow_rational

    n, d = cancel(num, den)
    return to_expr(pmul(n, pow_rational(d, Fraction(-1))))


def primitive(polys: list) -> list:
    """Divide a list of polynomials by the GCD of all of them.

    Used to keep fraction-free elimination rows small.  Polynomials with
    unsupported atoms are returned unchanged.
    """
    nonzero = [p for p in polys if p]
    if not nonzero:
        return polys
    variables = _vars_of(*nonzero)
    if variables is None or not variables:
        return polys
    mps = [_to_mp(p, variables) for p in nonzero]
    n = len(variables)
    low = tuple(min(e[i] for a in mps for e in a) for i in range(n))
    g: MP = {}
    for a in mps:
        g = _gcd(g, _shift(a)[0], 0, n)
    g = _mul(g, {low: Fraction(1)})
    if g == {(0,) * n: Fraction(1)}:
        return polys
    out = []
    for p in polys:
        if not p:
            out.append(p)
            continue
        q = _div_exact(_to_mp(p, variables), g)
        if q is None:
            return polys
        out.append(to_poly(_from_mp(q, variables)))
    return out


def split_content(p) -> tuple[list, dict]:
    """Symbols dividing every term of p, and p with those removed.

    The remainder is scaled so that its leading coefficient is 1.
    """
    variables = _vars_of(p)
    if variables is None or not p:
        return [], p
    a, low = _shift(_to_mp(p, variables))
    syms = [v for v, k in zip(variables, low) if k]
    return syms, to_poly(_from_mp(_monic(a), variables))
