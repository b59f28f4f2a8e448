"""Canonical multinomial normal form.

A polynomial is a plain ``dict`` mapping monomials to non-zero ``Fraction``
coefficients.  Dicts returned by this module are shared through memo
caches and must be treated as read-only.

A monomial is a tuple of entries sorted by ``entry[0]``.  Each entry is
``(sort_key, kind, atom, exponent, sub)``:

* ``kind == RAT``: ``atom ** exponent`` with a rational exponent.  ``sub``
  tells how the atom behaves under powers:

  - ``PLAIN``: a symbol, function application, logarithm or an opaque power.
  - ``SUMB``: a sum made monic up to sign (leading coefficient +1 or -1).  The
    exponent is never a positive integer (those are expanded) and never
    exceeds 1.
  - ``NUMB``: a prime (or unfactored) integer with exponent in (0, 1).

* ``kind == SYMEXP``: ``atom ** exponent`` where the exponent is an
  :class:`Expr` in normal form with no rational constant part.
* ``kind == EXPK``: the single exponential factor of the monomial,
  ``exp(exponent)``; ``atom`` is a sentinel.

Positive-real semantics are assumed for symbols when splitting powers and
logarithms of products: ``(x*y)^n = x^n * y^n`` and ``log(x*y) = log x + log y``.
"""

from __future__ import annotations

from fractions import Fraction
from math import floor

from ..errors import EvalDomainError, ExpansionLimitError
from .nodes import (
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
    mul,
    power,
)

RAT, SYMEXP, EXPK = 0, 1, 2
PLAIN, SUMB, NUMB = 0, 1, 2

NODE_LIMIT = 200_000

_F0 = Fraction(0)
_F1 = Fraction(1)
_EXP_SENTINEL = Sym("exp", "param")

Poly = dict


def set_node_limit(limit: int) -> int:
    """Change the expansion limit; returns the previous value."""
    global NODE_LIMIT
    old, NODE_LIMIT = NODE_LIMIT, int(limit)
    return old


# --------------------------------------------------------------------------
# entries and monomials


def _entry(kind: int, atom: Expr, exponent, sub: int = PLAIN) -> tuple:
    return ((atom.key, kind), kind, atom, exponent, sub)


def _mono_key(m: tuple) -> tuple:
    return tuple(
        (e[0], (0, e[3]) if e[1] == RAT else (1, e[3].key)) for e in m
    )


def sorted_monos(p: Poly) -> list:
    """Monomials in display order (descending canonical key, constant last)."""
    return sorted(p, key=_mono_key, reverse=True)


def constant(c) -> Poly:
    c = Fraction(c)
    return {(): c} if c else {}


POLY_ZERO: Poly = {}
POLY_ONE: Poly = {(): _F1}


def atom_poly(atom: Expr, exponent=_F1, sub: int = PLAIN) -> Poly:
    return {(_entry(RAT, atom, Fraction(exponent), sub),): _F1}


def _mono_mul(m1: tuple, m2: tuple):
    """Product of two monomials.

    Returns ``(mono, coefficient_factor, expansions)``; ``expansions`` lists
    polynomials that still have to be multiplied in (sums whose exponent
    became a positive integer).
    """
    if not m1:
        return m2, _F1, None
    if not m2:
        return m1, _F1, None
    out = []
    coeff = _F1
    expand = None
    i = j = 0
    n1, n2 = len(m1), len(m2)
    while i < n1 and j < n2:
        a = m1[i]
        b = m2[j]
        ka, kb = a[0], b[0]
        if ka < kb:
            out.append(a)
            i += 1
            continue
        if kb < ka:
            out.append(b)
            j += 1
            continue
        i += 1
        j += 1
        kind = a[1]
        if kind == RAT:
            e = a[3] + b[3]
            if not e:
                continue
            sub = a[4]
            if sub == PLAIN:
                out.append((ka, RAT, a[2], e, PLAIN))
            elif sub == NUMB:
                whole = floor(e)
                if whole:
                    coeff *= Fraction(a[2].value) ** whole
                    e -= whole
                if e:
                    out.append((ka, RAT, a[2], e, NUMB))
            else:
                if e > 0 and (e.denominator == 1 or e > 1):
                    whole = floor(e)
                    if e.denominator == 1:
                        rest = _F0
                    else:
                        rest = e - whole
                    expand = expand or []
                    expand.append(_int_power(to_poly(a[2]), whole))
                    if rest:
                        out.append((ka, RAT, a[2], rest, SUMB))
                else:
                    out.append((ka, RAT, a[2], e, SUMB))
        else:
            e = _normalize_expr(add(a[3], b[3]))
            if e == ZERO:
                continue
            out.append((ka, kind, a[2], e, a[4]))
    if i < n1:
        out.extend(m1[i:])
    if j < n2:
        out.extend(m2[j:])
    return tuple(out), coeff, expand


def _check_size(p: Poly) -> None:
    if len(p) > NODE_LIMIT:
        raise ExpansionLimitError(len(p), NODE_LIMIT)


def padd(*polys: Poly) -> Poly:
    polys = [p for p in polys if p]
    if not polys:
        return {}
    if len(polys) == 1:
        return polys[0]
    res = dict(polys[0])
    for p in polys[1:]:
        for m, c in p.items():
            v = res.get(m)
            if v is None:
                res[m] = c
            else:
                v += c
                if v:
                    res[m] = v
                else:
                    del res[m]
    _check_size(res)
    return res


def pscale(p: Poly, c) -> Poly:
    c = Fraction(c)
    if not c:
        return {}
    if c == 1:
        return p
    return {m: v * c for m, v in p.items()}


def pneg(p: Poly) -> Poly:
    return {m: -v for m, v in p.items()}


def psub(a: Poly, b: Poly) -> Poly:
    return padd(a, pneg(b))


def pmul(a: Poly, b: Poly) -> Poly:
    if not a or not b:
        return {}
    if len(a) > len(b):
        a, b = b, a
    if len(a) == 1:
        (m1, c1), = a.items()
        if not m1:
            return pscale(b, c1)
    res: dict = {}
    extra = []
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            m, cf, expand = _mono_mul(m1, m2)
            c = c1 * c2
            if cf != 1:
                c *= cf
            if expand is None:
                v = res.get(m)
                if v is None:
                    res[m] = c
                else:
                    res[m] = v + c
            else:
                term = {m: c}
                for q in expand:
                    term = pmul(term, q)
                extra.append(term)
        if len(res) > NODE_LIMIT:
            raise ExpansionLimitError(len(res), NODE_LIMIT)
    res = {m: c for m, c in res.items() if c}
    if extra:
        res = padd(res, *extra)
    _check_size(res)
    return res


def pmul_many(polys) -> Poly:
    out = POLY_ONE
    for p in polys:
        out = pmul(out, p)
        if not out:
            return {}
    return out


def _int_power(p: Poly, k: int) -> Poly:
    if k == 0:
        return POLY_ONE
    if k == 1:
        return p
    result = POLY_ONE
    base = p
    while k:
        if k & 1:
            result = pmul(result, base)
        k >>= 1
        if k:
            base = pmul(base, base)
    return result


# --------------------------------------------------------------------------
# numbers


def _factor_int(n: int, bound: int = 100_000) -> dict:
    """Prime factorization by trial division; a large leftover is kept whole."""
    out: dict = {}
    d = 2
    while d * d <= n and d <= bound:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _rational_factors(c: Fraction) -> dict:
    f = _factor_int(c.numerator)
    for p, k in _factor_int(c.denominator).items():
        f[p] = f.get(p, 0) - k
    return f


def _num_power(c: Fraction, e: Fraction) -> Poly:
    """c**e for c > 0 and rational e, with irrational parts as NUMB atoms."""
    if e.denominator == 1:
        return constant(c ** int(e))
    coeff = _F1
    mono = []
    for p, k in sorted(_rational_factors(c).items()):
        f = k * e
        whole = floor(f)
        if whole:
            coeff *= Fraction(p) ** whole
        f -= whole
        if f:
            mono.append(_entry(RAT, Num(p), f, NUMB))
    mono.sort(key=lambda en: en[0])
    return {tuple(mono): coeff}


def _log_constant(c: Fraction) -> Poly:
    if c <= 0:
        raise EvalDomainError(f"logarithm of non-positive constant {c}")
    out: Poly = {}
    for p, k in sorted(_rational_factors(c).items()):
        out = padd(out, {(_entry(RAT, Log(Num(p)), _F1),): Fraction(k)})
    return out


# --------------------------------------------------------------------------
# powers, exp, log


def _leading(p: Poly):
    m = max(p, key=_mono_key)
    return m, p[m]


def _is_single(p: Poly) -> bool:
    return len(p) == 1


def _const_value(p: Poly):
    """Rational value if p is constant, else None."""
    if not p:
        return _F0
    if len(p) == 1 and () in p:
        return p[()]
    return None


def _opaque_power(base: Poly, e: Fraction) -> Poly:
    atom = Pow(to_expr(base), Num(e))
    return {(_entry(RAT, atom, _F1),): _F1}


def _sum_power(m: Poly, e: Fraction) -> Poly:
    """m**e for a sum ``m`` that already has leading coefficient +-1."""
    if e.denominator == 1 and e > 0:
        return _int_power(m, int(e))
    atom = to_expr(m)
    if e > 1:
        whole = floor(e)
        return pmul(_int_power(m, whole), {(_entry(RAT, atom, e - whole, SUMB),): _F1})
    return {(_entry(RAT, atom, e, SUMB),): _F1}


def _entry_power(en: tuple, e: Fraction) -> Poly:
    kind, atom, ex, sub = en[1], en[2], en[3], en[4]
    if kind == RAT:
        f = ex * e
        if sub == PLAIN:
            return {(_entry(RAT, atom, f),): _F1} if f else POLY_ONE
        if sub == NUMB:
            return _num_power(Fraction(atom.value), f)
        return _sum_power(to_poly(atom), f) if f else POLY_ONE
    if kind == SYMEXP:
        return {(_entry(SYMEXP, atom, _normalize_expr(mul(Num(e), ex))),): _F1}
    return exp_of_poly(pscale(to_poly(ex), e))


def pow_rational(p: Poly, e: Fraction) -> Poly:
    e = Fraction(e)
    if not e:
        return POLY_ONE
    if not p:
        if e > 0:
            return {}
        raise EvalDomainError("zero raised to a non-positive power")
    if e.denominator == 1 and e > 0:
        return _int_power(p, int(e))
    if len(p) == 1:
        (m, c), = p.items()
        if c < 0 and e.denominator != 1:
            return _opaque_power(p, e)
        if c > 0:
            out = _num_power(c, e)
        else:
            out = constant(c ** int(e))
        for en in m:
            out = pmul(out, _entry_power(en, e))
        return out
    _, lc = _leading(p)
    g = abs(lc)
    m = pscale(p, 1 / g) if g != 1 else p
    return pmul(_num_power(g, e), _sum_power(m, e))


def _pow_symbolic(p: Poly, ex: Poly) -> Poly:
    """p ** ex for an exponent without constant part."""
    if not p:
        raise EvalDomainError("zero raised to a symbolic power")
    exe = to_expr(ex)
    if len(p) == 1:
        (m, c), = p.items()
        if c < 0:
            atom = Pow(to_expr(p), exe)
            return {(_entry(RAT, atom, _F1),): _F1}
        out = POLY_ONE if c == 1 else exp_of_poly(pmul(ex, _log_constant(c)))
        for en in m:
            kind, atom, ee, sub = en[1], en[2], en[3], en[4]
            if kind == RAT and sub == NUMB:
                f = pmul(ex, pscale(_log_constant(Fraction(atom.value)), ee))
                out = pmul(out, exp_of_poly(f))
            elif kind == RAT:
                newe = _normalize_expr(mul(Num(ee), exe))
                out = pmul(out, {(_entry(SYMEXP, atom, newe),): _F1})
            elif kind == SYMEXP:
                newe = _normalize_expr(mul(ee, exe))
                out = pmul(out, {(_entry(SYMEXP, atom, newe),): _F1})
            else:
                out = pmul(out, exp_of_poly(pmul(to_poly(ee), ex)))
        return out
    _, lc = _leading(p)
    g = abs(lc)
    out = POLY_ONE
    if g != 1:
        out = exp_of_poly(pmul(ex, _log_constant(g)))
        p = pscale(p, 1 / g)
    return pmul(out, {(_entry(SYMEXP, to_expr(p), exe),): _F1})


def pow_poly(base: Poly, ex: Poly) -> Poly:
    c = _const_value(ex)
    if c is not None:
        return pow_rational(base, c)
    c0 = ex.get((), _F0)
    rest = {m: v for m, v in ex.items() if m}
    out = _pow_symbolic(base, rest)
    if c0:
        out = pmul(pow_rational(base, c0), out)
    return out


def _log_split(m: tuple):
    """If monomial is (rest)*log(X) with X not a number, return (rest, X)."""
    for idx, en in enumerate(m):
        if en[1] == RAT and en[4] == PLAIN and en[3] == 1 and isinstance(en[2], Log):
            rest = m[:idx] + m[idx + 1 :]
            arg = en[2].arg
            if isinstance(arg, Num) and rest:
                return None
            if any(isinstance(r[2], Log) for r in rest if r[1] == RAT):
                return None
            return rest, arg
    return None


def exp_of_poly(a: Poly) -> Poly:
    if not a:
        return POLY_ONE
    out = POLY_ONE
    remaining = {}
    for m, c in a.items():
        split = _log_split(m)
        if split is None:
            remaining[m] = c
            continue
        rest, arg = split
        if rest:
            out = pmul(out, pow_poly(to_poly(arg), {rest: c}))
        else:
            out = pmul(out, pow_rational(to_poly(arg), c))
    if remaining:
        out = pmul(out, {(_entry(EXPK, _EXP_SENTINEL, to_expr(remaining)),): _F1})
    return out


def log_of_poly(p: Poly) -> Poly:
    if not p:
        raise EvalDomainError("logarithm of zero")
    if len(p) == 1:
        (m, c), = p.items()
        if c < 0:
            return {(_entry(RAT, Log(to_expr(p)), _F1),): _F1}
        out = _log_constant(c) if c != 1 else {}
        for en in m:
            kind, atom, ee, sub = en[1], en[2], en[3], en[4]
            if kind == RAT:
                if sub == NUMB:
                    out = padd(out, pscale(_log_constant(Fraction(atom.value)), ee))
                else:
                    out = padd(out, {(_entry(RAT, Log(atom), _F1),): ee})
            elif kind == SYMEXP:
                out = padd(out, pmul(to_poly(ee), {(_entry(RAT, Log(atom), _F1),): _F1}))
            else:
                out = padd(out, to_poly(ee))
        return out
    _, lc = _leading(p)
    g = abs(lc)
    out = {}
    if g != 1:
        out = _log_constant(g)
        p = pscale(p, 1 / g)
    return padd(out, {(_entry(RAT, Log(to_expr(p)), _F1),): _F1})


# --------------------------------------------------------------------------
# conversion


def to_poly(e: Expr) -> Poly:
    p = e._poly
    if p is not None:
        return p
    p = _to_poly(e)
    e._poly = p
    return p


def _to_poly(e: Expr) -> Poly:
    if isinstance(e, Num):
        return constant(e.value)
    if isinstance(e, Sym):
        return {(_entry(RAT, e, _F1),): _F1}
    if isinstance(e, Add):
        return padd(*[to_poly(s) for s in e.terms])
    if isinstance(e, Mul):
        return pmul_many(to_poly(f) for f in e.factors)
    if isinstance(e, Pow):
        return pow_poly(to_poly(e.base), to_poly(e.exp))
    if isinstance(e, Fn):
        args = tuple(_normalize_expr(a) for a in e.args)
        return {(_entry(RAT, Fn(e.name, args, e.deriv), _F1),): _F1}
    if isinstance(e, Exp):
        return exp_of_poly(to_poly(e.arg))
    if isinstance(e, Log):
        return log_of_poly(to_poly(e.arg))
    raise TypeError(f"unknown node {type(e).__name__}")


def _entry_expr(en: tuple) -> Expr:
    kind, atom, ex, sub = en[1], en[2], en[3], en[4]
    if kind == RAT:
        if sub == PLAIN:
            return power(atom, Num(ex))
        return Pow(atom, Num(ex))
    if kind == SYMEXP:
        return Pow(atom, ex)
    return Exp(ex)


def mono_expr(m: tuple, c: Fraction = _F1) -> Expr:
    return mul(Num(c), *[_entry_expr(en) for en in m])


def to_expr(p: Poly) -> Expr:
    if not p:
        return ZERO
    terms = [mono_expr(m, p[m]) for m in sorted_monos(p)]
    out = add(*terms)
    if out._poly is None:
        out._poly = p
    return out


def _normalize_expr(e: Expr) -> Expr:
    return to_expr(to_poly(e))


def normalize(e: Expr) -> Expr:
    """Canonical expanded form of ``e``."""
    return to_expr(to_poly(e))


# --------------------------------------------------------------------------
# differentiation and substitution on polynomials


def _entry_diff(en: tuple, v: Sym) -> Poly:
    """Derivative of the single factor described by ``en``."""
    kind, atom, ex, sub = en[1], en[2], en[3], en[4]
    if kind == RAT:
        if sub == NUMB:
            return {}
        if v not in atom.free_symbols():
            return {}
        if sub == SUMB:
            m = to_poly(atom)
            return pscale(pmul(_sum_power(m, ex - 1), pdiff(m, v)), ex)
        inner = _plain_diff(atom, v)
        if not inner:
            return {}
        if ex == 1:
            return inner
        lower = {(_entry(RAT, atom, ex - 1),): ex} if ex != 1 else POLY_ONE
        return pmul(lower, inner)
    if kind == SYMEXP:
        fs = atom.free_symbols() | ex.free_symbols()
        if v not in fs:
            return {}
        b = to_poly(atom)
        e = to_poly(ex)
        part = padd(
            pmul(pdiff(e, v), log_of_poly(b)),
            pmul(e, pmul(pdiff(b, v), pow_rational(b, Fraction(-1)))),
        )
        return pmul({(en,): _F1}, part)
    if v not in ex.free_symbols():
        return {}
    return pmul({(en,): _F1}, pdiff(to_poly(ex), v))


def _plain_diff(atom: Expr, v: Sym) -> Poly:
    if isinstance(atom, Sym):
        return POLY_ONE if atom == v else {}
    if isinstance(atom, Fn):
        out = []
        for i, a in enumerate(atom.args):
            da = pdiff(to_poly(a), v)
            if da:
                d = list(atom.deriv)
                d[i] += 1
                out.append(pmul(atom_poly(Fn(atom.name, atom.args, d)), da))
        return padd(*out)
    if isinstance(atom, Log):
        x = to_poly(atom.arg)
        return pmul(pdiff(x, v), pow_rational(x, Fraction(-1)))
    if isinstance(atom, Pow):
        b = to_poly(atom.base)
        e = to_poly(atom.exp)
        c = _const_value(e)
        if c is not None:
            return pscale(pmul(to_poly(Pow(atom.base, Num(c - 1))), pdiff(b, v)), c)
        part = padd(
            pmul(pdiff(e, v), log_of_poly(b)),
            pmul(e, pmul(pdiff(b, v), pow_rational(b, Fraction(-1)))),
        )
        return pmul(atom_poly(atom), part)
    raise TypeError(f"cannot differentiate atom {type(atom).__name__}")


def pdiff(p: Poly, v: Sym) -> Poly:
    """Partial derivative of a polynomial with respect to the symbol ``v``."""
    out: list = []
    simple: dict = {}
    for m, c in p.items():
        for idx, en in enumerate(m):
            if en[1] == RAT and en[4] == PLAIN and isinstance(en[2], Sym):
                if en[2] != v:
                    continue
                ex = en[3]
                if ex == 1:
                    nm = m[:idx] + m[idx + 1 :]
                else:
                    nm = m[:idx] + ((en[0], RAT, en[2], ex - 1, PLAIN),) + m[idx + 1 :]
                val = simple.get(nm, _F0) + c * ex
                simple[nm] = val
                continue
            d = _entry_diff(en, v)
            if d:
                rest = m[:idx] + m[idx + 1 :]
                out.append(pmul({rest: c}, d))
    simple = {m: c for m, c in simple.items() if c}
    return padd(simple, *out)


def psubs(p: Poly, repl: dict) -> Poly:
    """Replace plain atoms (keys of ``repl``) by polynomials."""
    if not repl:
        return p
    keys = {a.key for a in repl}
    cache: dict = {}
    out: list = []
    untouched: dict = {}
    for m, c in p.items():
        hit = [en for en in m if en[1] == RAT and en[4] == PLAIN and en[2].key in keys]
        if not hit:
            untouched[m] = c
            continue
        rest = tuple(en for en in m if not (en[1] == RAT and en[4] == PLAIN and en[2].key in keys))
        term = {rest: c}
        for en in hit:
            ck = (en[2].key, en[3])
            r = cache.get(ck)
            if r is None:
                r = cache[ck] = pow_rational(repl[en[2]], en[3])
            term = pmul(term, r)
        out.append(term)
    return padd(untouched, *out)


# --------------------------------------------------------------------------
# inspection helpers


def is_constant(p: Poly) -> bool:
    return _const_value(p) is not None


def const_value(p: Poly):
    return _const_value(p)


def mono_atoms(m: tuple) -> list:
    return [en[2] for en in m]


def sum_denominators(p: Poly) -> dict:
    """Most negative exponent of every SUMB atom and of plain non-symbol atoms."""
    worst: dict = {}
    for m in p:
        for en in m:
            if en[1] == RAT and en[3] < 0 and en[4] == SUMB:
                cur = worst.get(en[2])
                if cur is None or en[3] < cur:
                    worst[en[2]] = en[3]
    return worst


def clear_denominators(p: Poly) -> Poly:
    """Multiply by the powers of sums that appear with negative exponents.

    The result vanishes iff ``p`` does, wherever those sums are non-zero.
    """
    worst = sum_denominators(p)
    for atom, e in sorted(worst.items(), key=lambda kv: kv[0].key):
        k = -floor(e)
        m_poly = to_poly(atom)
        parts = []
        for m, c in p.items():
            ex = Fraction(k)
            rest = []
            for en in m:
                if en[1] == RAT and en[4] == SUMB and en[2] == atom:
                    ex += en[3]
                else:
                    rest.append(en)
            parts.append(pmul({tuple(rest): c}, _sum_power(m_poly, ex) if ex else POLY_ONE))
        p = padd(*parts)
    return p


def is_zero_poly(p: Poly) -> bool:
    if not p:
        return True
    return not clear_denominators(p)


def coefficient_split(p: Poly, is_split_atom) -> dict:
    """Group terms by the part of each monomial made of splitting atoms.

    Returns ``{split_mono: coefficient_poly}``.  ``is_split_atom(entry)``
    decides which entries go to the splitting part.
    """
    out: dict = {}
    for m, c in p.items():
        key = []
        rest = []
        for en in m:
            (key if is_split_atom(en) else rest).append(en)
        k = tuple(key)
        bucket = out.get(k)
        if bucket is None:
            bucket = out[k] = {}
        r = tuple(rest)
        v = bucket.get(r, _F0) + c
        if v:
            bucket[r] = v
        else:
            bucket.pop(r, None)
    return {k: v for k, v in out.items() if v}
