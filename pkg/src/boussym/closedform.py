"""Closed-form solution machinery: travelling-wave quadratures for the power
family, the Weierstrass function, the time profile (h')^2 = k3*h^3 + k4 and
the nonclassical infinitesimals for quadratic f."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .determining import NumericField
from .errors import BlowUpError, DomainViolationError, IntegrationError, PoleProximityError
from .expr import Expr, compiled, diff, fn, normalize, param, t, u, x
from .numverify import SampledFunction, integrate_ode
from .report import Report

QUAD_RTOL = 1e-11

# ---------------------------------------------------------------------------
# quadrature for travelling waves with f(h) = d(ah+b)^n + k h


@dataclass(frozen=True)
class QuadratureSolution:
    """z + k4 = sign*sqrt(a*m/2) * integral of R(h)^(-1/2) dh from ``h_ref``.

    R(h) = -a*(k2*h + k3)*m - d*(a*h + b)^m with m = n + 1, or for n = -1
    R(h) = -a*(k2*h + k3) - d*log(a*h + b) with prefactor sqrt(a/2).
    Along the solution h'' = -k2 - d*(a*h + b)^n, so this is the travelling
    wave equation with lambda^2 = 1 - k, k1 = 0 and right-hand side -k2.
    """

    n: float
    a: float
    d: float
    b: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    k4: float = 0.0
    sign: int = 1
    h_ref: float = 0.0

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.a == 0:
            raise ValueError("a must be nonzero")
        if self.scale <= 0:
            raise DomainViolationError("a*m/2 must be positive for a real quadrature")

    @property
    def log_branch(self) -> bool:
        return self.n == -1

    @property
    def m(self) -> float:
        return 1.0 if self.log_branch else self.n + 1.0

    @property
    def scale(self) -> float:
        return self.a * self.m / 2.0

    def radicand(self, h: float) -> float:
        a, b, d = self.a, self.b, self.d
        lin = a * h + b
        needs_positive = (self.log_branch and d != 0) or float(self.m) != int(self.m)
        if lin <= 0 and needs_positive:
            raise DomainViolationError(f"a*h + b = {lin:.6g} is not positive")
        if self.log_branch:
            return -a * (self.k2 * h + self.k3) - (d * math.log(lin) if d else 0.0)
        return -a * (self.k2 * h + self.k3) * self.m - d * lin**self.m

    def slope(self, h: float) -> float:
        """h' on the solution branch through h."""
        return self.sign * math.sqrt(self.radicand(h) / self.scale)

    def second(self, h: float) -> float:
        return -self.k2 - self.d * (self.a * h + self.b) ** self.n

    def f_expr(self, k=0) -> Expr:
        """The travelling-wave nonlinearity d(a*u + b)^n + k*u (exact)."""
        from fractions import Fraction

        q = lambda v: Fraction(v).limit_denominator(10**12)  # noqa: E731
        return normalize(q(self.d) * (q(self.a) * u + q(self.b)) ** q(self.n) + q(k) * u)


def _check_positive(qs: QuadratureSolution, lo: float, hi: float, samples: int = 65) -> None:
    for h in np.linspace(lo, hi, samples):
        if qs.radicand(float(h)) <= 0:
            raise DomainViolationError(f"integrand is not positive at h = {h:.6g}")


def quadrature_relation(qs: QuadratureSolution, h: float) -> float:
    """z such that the quadrature from ``qs.h_ref`` to h equals z + k4."""
    h = float(h)
    if h == qs.h_ref:
        return 0.0 - qs.k4
    lo, hi = sorted((qs.h_ref, h))
    _check_positive(qs, lo, hi)
    val, err = quad(lambda s: qs.radicand(s) ** -0.5, qs.h_ref, h, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    if not math.isfinite(val) or err > 1e-9 * max(abs(val), 1e-300):
        raise IntegrationError(f"quadrature did not converge (estimate {err:.3g})", h)
    return qs.sign * math.sqrt(qs.scale) * val - qs.k4


def invert_quadrature(qs: QuadratureSolution, zval: float, h_lo: float, h_hi: float, xtol: float = 1e-13) -> float:
    """h with quadrature_relation(qs, h) == zval, by bracketing root search in [h_lo, h_hi]."""
    g = lambda h: quadrature_relation(qs, h) - zval  # noqa: E731
    glo, ghi = g(h_lo), g(h_hi)
    if glo == 0:
        return h_lo
    if ghi == 0:
        return h_hi
    if glo * ghi > 0:
        raise DomainViolationError(f"z = {zval:.6g} is not bracketed by h in [{h_lo}, {h_hi}]")
    return brentq(g, h_lo, h_hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)


def quadrature_profile(qs: QuadratureSolution, h_lo: float, h_hi: float, points: int = 201) -> SampledFunction:
    """Sampled h(z) with components (h, h', h'', h''') over the z-image of [h_lo, h_hi].

    Grid points come from evaluating the quadrature at evenly spaced h; in
    between, values are found by inverting the relation.
    """
    _check_positive(qs, h_lo, h_hi)
    hs = np.linspace(h_lo, h_hi, points)
    zs = np.array([quadrature_relation(qs, h) for h in hs])
    order = np.argsort(zs)
    hs, zs = hs[order], zs[order]

    def state(h):
        h1 = qs.slope(h)
        h2 = qs.second(h)
        a, b, d, n = qs.a, qs.b, qs.d, qs.n
        lin = a * h + b
        h3 = -d * n * a * lin ** (n - 1) * h1
        h4 = -d * n * a * ((n - 1) * a * lin ** (n - 2) * h1 * h1 + lin ** (n - 1) * h2)
        return np.array([h, h1, h2, h3]), np.array([h1, h2, h3, h4])

    vals, ders = zip(*(state(h) for h in hs))

    def at(zv):
        i = int(np.clip(np.searchsorted(zs, zv), 1, len(zs) - 1))
        lo, hi = sorted((hs[i - 1], hs[i]))
        return invert_quadrature(qs, zv, lo, hi)

    return SampledFunction(
        zs, np.array(vals), np.array(ders),
        dense=lambda zv: state(at(zv))[0],
        derivative_fn=lambda zv: state(at(zv))[1],
        names=["h", "h'", "h''", "h'''"],
        meta={"n": qs.n, "a": qs.a, "b": qs.b, "d": qs.d, "k2": qs.k2, "k3": qs.k3, "k4": qs.k4,
              "sign": qs.sign, "h_ref": qs.h_ref},
    )


# ---------------------------------------------------------------------------
# Weierstrass elliptic function on the real line


@dataclass(frozen=True)
class WeierstrassParams:
    g2: float
    g3: float
    eps: float = 1e-6
    terms: int = 40


def _laurent_coefficients(g2: float, g3: float, terms: int) -> list:
    """c_k for P(z) = 1/z^2 + sum_{k>=2} c_k z^(2k-2)."""
    c = [0.0, 0.0, g2 / 20.0, g3 / 28.0]
    for k in range(4, terms + 2):
        s = sum(c[m] * c[k - m] for m in range(2, k - 1))
        c.append(3.0 * s / ((2 * k + 1) * (k - 3)))
    return c


def _series(w: float, c: list):
    """(P, P') from the Laurent series, or None when the tail is not negligible."""
    w2 = w * w
    p = 1.0 / w2
    dp = -2.0 / (w2 * w)
    power = 1.0  # w^(2k-4) for k = 2
    small = 0
    for k in range(2, len(c)):
        term = c[k] * power * w2
        p += term
        dp += c[k] * (2 * k - 2) * power * w
        if abs(term) <= 1e-17 * abs(p):
            small += 1
            if small >= 3:
                return p, dp
        else:
            small = 0
        power *= w2
    return None


def weierstrass(zval: float, wp: WeierstrassParams) -> tuple[float, float]:
    """(P(z), P'(z)) for real z and real invariants g2, g3.

    The Laurent series is summed at z / 2^N, with N the smallest count for
    which the series tail is below rounding, then doubled N times.
    Points within ``wp.eps`` of a lattice pole raise PoleProximityError.
    """
    zval = float(zval)
    if abs(zval) < wp.eps:
        raise PoleProximityError(f"z = {zval!r} is within {wp.eps} of the pole at 0")
    c = _laurent_coefficients(wp.g2, wp.g3, wp.terms)
    steps = 0
    w = zval
    seed = _series(w, c)
    while seed is None:
        w /= 2.0
        steps += 1
        seed = _series(w, c)
    p, dp = seed
    limit = 1.0 / (wp.eps * wp.eps)
    for _ in range(steps):
        if dp == 0.0:
            raise PoleProximityError(f"z = {zval!r} is at a lattice pole")
        p2 = 6.0 * p * p - wp.g2 / 2.0
        p3 = 12.0 * p * dp
        q = p2 / (2.0 * dp)
        p, dp = q * q - 2.0 * p, p2 * (p3 * dp - p2 * p2) / (4.0 * dp**3) - dp
        if abs(p) > limit or not math.isfinite(p):
            raise PoleProximityError(f"z = {zval!r} is within about {wp.eps} of a lattice pole")
    if abs(p) > limit:
        raise PoleProximityError(f"z = {zval!r} is within about {wp.eps} of a lattice pole")
    return p, dp


def weierstrass_identity_residual(zval: float, wp: WeierstrassParams) -> float:
    """|P'^2 - 4P^3 + g2 P + g3| relative to the size of its terms."""
    p, dp = weierstrass(zval, wp)
    terms = (dp * dp, 4 * p**3, wp.g2 * p, wp.g3)
    return abs(terms[0] - terms[1] + terms[2] + terms[3]) / (1.0 + max(abs(v) for v in terms))


# ---------------------------------------------------------------------------
# the time profile (h')^2 = k3 h^3 + k4


def _profile_from_callables(grid, hfun: Callable, dfun: Callable, meta: dict) -> SampledFunction:
    vals = np.array([hfun(s) for s in grid])
    ders = np.array([dfun(s) for s in grid])
    return SampledFunction(grid, vals, ders, dense=hfun, derivative_fn=dfun, names=["h", "h'"], meta=meta)


def solve_h(k3: float, k4: float, t_range, h0: float, sign: int = 1, tol: float = 1e-12,
            closed_form: bool = True, points: int = 201) -> SampledFunction:
    """h(t) on ``t_range`` with h(t_range[0]) = h0 and h' = sign*sqrt(k3 h0^3 + k4).

    Components are (h, h'); the derivative is (h', h''), h'' = 1.5 k3 h^2.
    With ``closed_form`` the elementary cases k3 = 0 (linear) and k4 = 0
    (h = 4/(k3 (t - tc)^2)) are returned exactly; everything else is
    integrated in second-order form, which passes through zeros of h'.
    """
    ta, tb = float(t_range[0]), float(t_range[1])
    if tb <= ta:
        raise ValueError("t_range must be increasing")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    disc = k3 * h0**3 + k4
    if disc < 0:
        raise DomainViolationError(f"inconsistent initial data: k3*h0^3 + k4 = {disc:.6g} < 0")
    meta = {"k3": k3, "k4": k4, "t0": ta, "h0": h0, "sign": sign, "tol": tol}
    grid = np.linspace(ta, tb, points)
    if closed_form and k3 == 0:
        slope = sign * math.sqrt(k4)
        meta["branch"] = "linear"
        return _profile_from_callables(
            grid, lambda s: np.array([h0 + slope * (s - ta), slope]), lambda s: np.array([slope, 0.0]), meta
        )
    if closed_form and k4 == 0 and h0 != 0:
        if k3 * h0 <= 0:
            raise DomainViolationError("k4 = 0 needs k3*h0 > 0")
        tc = ta + sign * 2.0 / math.sqrt(k3 * h0)
        if ta <= tc <= tb:
            raise BlowUpError(f"h blows up at t = {tc:.12g}", tc)
        meta["branch"] = "rational"
        meta["pole"] = tc

        def hf(s):
            w = s - tc
            return np.array([4.0 / (k3 * w * w), -8.0 / (k3 * w**3)])

        def df(s):
            w = s - tc
            return np.array([-8.0 / (k3 * w**3), 24.0 / (k3 * w**4)])

        return _profile_from_callables(grid, hf, df, meta)
    meta["branch"] = "numeric"

    def rhs(s, y):
        return [y[1], 1.5 * k3 * y[0] * y[0]]

    try:
        sf = integrate_ode(rhs, [h0, sign * math.sqrt(disc)], (ta, tb), tol=max(tol, 1e-13), names=["h", "h'"])
    except BlowUpError as exc:
        raise BlowUpError(f"h blows up inside t_range: {exc}", exc.location) from None
    big = float(np.max(np.abs(sf.values[:, 0])))
    if big > 1e8:
        where = float(sf.grid[int(np.argmax(np.abs(sf.values[:, 0])))])
        raise BlowUpError(f"h grows beyond 1e8 near t = {where:.6g}", where)
    sf.meta.update(meta)
    return sf


def profile_residuals(sf: SampledFunction, k3: float, k4: float, samples: int = 201) -> dict:
    """Largest |h'^2 - k3 h^3 - k4| and |h'' - 1.5 k3 h^2| along the profile."""
    first = second = 0.0
    for s in np.linspace(*sf.span, samples):
        h, h1 = sf(s)
        h2 = sf.derivative(s)[1]
        first = max(first, abs(h1 * h1 - k3 * h**3 - k4))
        second = max(second, abs(h2 - 1.5 * k3 * h * h))
    return {"first_order": first, "second_order": second}


def quadrature_check(qs: QuadratureSolution, h_lo: float, h_hi: float, tol: float = 1e-6,
                     points: int = 101) -> Report:
    """Compare the inverted quadrature with direct integration of h'' = -k2 - d(ah+b)^n."""
    sf = quadrature_profile(qs, h_lo, h_hi, points)
    lo, hi = sf.span
    a, b, d, n, k2 = qs.a, qs.b, qs.d, qs.n, qs.k2
    ref = integrate_ode(lambda s, y: [y[1], -k2 - d * (a * y[0] + b) ** n], list(sf(lo)[:2]), (lo, hi), tol=1e-12)
    worst = max(abs(sf(s)[0] - ref(s)[0]) for s in np.linspace(lo, hi, 41))
    rep = Report("quadrature vs integration", worst <= tol, worst, tol, settings={"z_span": [lo, hi]})
    return rep


def weierstrass_profile_check(k3: float, k4: float, s0: float, length: float, tol: float = 1e-7,
                              samples: int = 41) -> Report:
    """Compare solve_h with h(t) = (4/k3) P(s0 + t; 0, -k3^2 k4 / 16).

    The profile is started from the Weierstrass values at s0, so the two
    routes share nothing but the initial point.
    """
    if k3 == 0:
        raise ValueError("the Weierstrass form needs k3 != 0")
    wp = WeierstrassParams(0.0, -k3 * k3 * k4 / 16.0)
    c = 4.0 / k3
    P, dP = weierstrass(s0, wp)
    h0, h1 = c * P, c * dP
    sf = solve_h(k3, k4, (0.0, length), h0, sign=1 if h1 >= 0 else -1, closed_form=False)
    worst = 0.0
    for s in np.linspace(0.0, length, samples):
        ref = c * weierstrass(s0 + s, wp)[0]
        worst = max(worst, abs(sf(s)[0] - ref) / max(1.0, abs(ref)))
    return Report("time profile vs Weierstrass", worst <= tol, worst, tol,
                  settings={"g2": 0.0, "g3": wp.g3, "s0": s0, "length": length})


# ---------------------------------------------------------------------------
# nonclassical infinitesimals for f = d u^2 + b u + c


class TimeProfile:
    """h(t) with exact higher derivatives generated by h'' = 1.5 k3 h^2."""

    def __init__(self, sf: SampledFunction, k3: float):
        self.sf = sf
        self.k3 = k3
        H, H1 = param("hv"), param("hv1")
        self._vars = [H, H1]
        exprs = [H, H1]
        while len(exprs) < 8:
            e = exprs[-1]
            exprs.append(normalize(diff(e, H) * H1 + diff(e, H1) * 1.5 * k3 * H**2))
        self._c = [compiled(e, self._vars) for e in exprs]
        e = normalize(H / H1**2)
        self._ratio = [compiled(e, self._vars)]
        for _ in range(6):
            e = normalize(diff(e, H) * H1 + diff(e, H1) * 1.5 * k3 * H**2)
            self._ratio.append(compiled(e, self._vars))

    def state(self, s: float) -> list:
        y = self.sf(s)
        return [float(y[0]), float(y[1])]

    def __call__(self, s: float) -> float:
        return self.state(s)[0]

    def derivative(self, index) -> Callable[[float], float]:
        k = index[0] if isinstance(index, tuple) else int(index)
        if k >= len(self._c):
            raise ValueError("derivative order too high")
        c = self._c[k]
        return lambda s: c(self.state(s))

    def ratio_derivative(self, k: int) -> Callable[[float], float]:
        """k-th derivative of h/h'^2."""
        c = self._ratio[k]
        return lambda s: c(self.state(s))


class ProfileIntegral:
    """I(t) = integral of h/h'^2 from ``base``; derivatives are exact."""

    def __init__(self, prof: TimeProfile, base: float):
        self.prof = prof
        self.base = base
        self._cache: dict = {}

    def __call__(self, s: float) -> float:
        s = float(s)
        hit = self._cache.get(s)
        if hit is not None:
            return hit
        g = self.prof.ratio_derivative(0)
        lo, hi = sorted((self.base, s))
        pts = np.linspace(lo, hi, 9)
        for p in pts:
            if self.prof.state(p)[1] == 0:
                raise DomainViolationError(f"h' vanishes at t = {p:.6g} on the integration path")
        val, err = quad(g, self.base, s, epsabs=1e-14, epsrel=QUAD_RTOL, limit=200)
        if not math.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
            raise IntegrationError(f"h/h'^2 quadrature did not converge (estimate {err:.3g})", s)
        self._cache[s] = val
        return val

    def derivative(self, index) -> Callable[[float], float]:
        k = index[0] if isinstance(index, tuple) else int(index)
        return self.prof.ratio_derivative(k - 1)


@dataclass
class NonclassicalAnsatz:
    """Constants and time profile of the nonclassical fields for f = d u^2 + b u + c."""

    b: float
    d: float
    k1: float
    k2: float
    k3: float
    k4: float
    h: SampledFunction
    base: float = 1.0

    def __post_init__(self):
        if self.d == 0:
            raise ValueError("d must be nonzero")
        res = profile_residuals(self.h, self.k3, self.k4, samples=41)
        scale = 1.0 + float(np.max(np.abs(self.h.values[:, 1]))) ** 2
        if res["first_order"] > 1e-6 * scale:
            raise ValueError(f"h does not satisfy h'^2 = k3 h^3 + k4 (residual {res['first_order']:.3g})")
        if np.any(self.h.values[:, 0] == 0):
            raise DomainViolationError("h vanishes on its span")


class ExprField(NumericField):
    """A coefficient given as an expression in (x, t, u) with numeric functions."""

    def __init__(self, expr: Expr, functions: dict):
        self.expr = expr
        self.functions = functions
        self._cache: dict = {}
        super().__init__(self._compile((0, 0, 0)))

    def _compile(self, index) -> Callable:
        c = self._cache.get(index)
        if c is None:
            e = self.expr
            for var, k in zip((x, t, u), index):
                if k:
                    e = diff(e, var, k)
            cc = compiled(normalize(e), [x, t, u])
            fns = self.functions
            c = self._cache[index] = lambda X, T, U: cc([X, T, U], fns)
        return c

    def derivative(self, index) -> Callable:
        return self._compile(tuple(index))


CONVENTIONS = ("printed", "consistent")


def nonclassical_expressions(na_b, na_d, k1, k2, convention: str = "printed") -> tuple[Expr, Expr]:
    """p and r as expressions in x, t, u and the functions h(t), I(t).

    ``printed`` is the reference form under test. ``consistent`` is the form that
    satisfies the nonclassical determining equations: it equals the printed
    p and r divided by -d, with the sign of the (1 - b) term reversed.
    """
    from fractions import Fraction

    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    q = lambda v: Fraction(v).limit_denominator(10**12) if isinstance(v, float) else v  # noqa: E731
    b, d, k1, k2 = q(na_b), q(na_d), q(k1), q(k2)
    H, H1, I = fn("h", t), fn("h", t, deriv=(1,)), fn("I", t)
    p1 = H1 / (2 * H)
    p2 = k1 * p1 * I + k2 * p1
    dp1, dp2 = diff(p1, t), diff(p2, t)
    quad_x = p1 * (dp1 + 2 * p1**2)
    lin_x = p1 * dp2 + p2 * dp1 + 4 * p1**2 * p2
    const = p2 * dp2 + 2 * p1 * p2**2
    if convention == "printed":
        p = -d * (p1 * x + p2)
        r = quad_x * x**2 + lin_x * x + 2 * d * p1 * u + const + (1 - b) * p1
    else:
        p = p1 * x + p2
        r = -2 * p1 * u - (quad_x * x**2 + lin_x * x + const + (b - 1) * p1) / d
    return normalize(p), normalize(r)


def nonclassical_fields(na: NonclassicalAnsatz, convention: str = "printed") -> tuple[ExprField, ExprField]:
    """Numeric evaluators of p(x, t) and r(x, t, u) with derivative access."""
    prof = TimeProfile(na.h, na.k3)
    funcs = {"h": prof, "I": ProfileIntegral(prof, na.base)}
    p, r = nonclassical_expressions(na.b, na.d, na.k1, na.k2, convention)
    return ExprField(p, funcs), ExprField(r, funcs)
