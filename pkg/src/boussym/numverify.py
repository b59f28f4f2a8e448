"""Numerical checks: ODE integration with dense output, finite-difference
PDE residuals, reduction lifting and invariant-surface residuals."""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BlowUpError, DomainViolationError, EvalDomainError, IntegrationError
from .expr import Expr, as_expr, compiled, diff, normalize, t, u, x, z
from .report import Report

DEFAULT_TOL = 1e-9
STEP_2 = 1e-3  # second derivatives
STEP_4 = 2e-2  # fourth derivative: larger step keeps rounding below truncation
SPAN_SLACK = 1e-12


class SampledFunction:
    """A vector-valued function of one variable known on a grid.

    ``values`` and ``derivs`` are (len(grid), m) arrays. Between grid points
    the function is evaluated through ``dense`` when given (the integrator's
    own interpolant) and by cubic Hermite interpolation otherwise. The
    derivative comes from ``derivative_fn`` when given, else from the same
    Hermite interpolant.
    """

    def __init__(
        self,
        grid,
        values,
        derivs,
        dense: Callable | None = None,
        derivative_fn: Callable | None = None,
        names: Sequence[str] | None = None,
        meta: dict | None = None,
    ):
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.atleast_2d(np.asarray(values, dtype=float))
        self.derivs = np.atleast_2d(np.asarray(derivs, dtype=float))
        if self.values.shape[0] != self.grid.size:
            self.values = self.values.T
            self.derivs = self.derivs.T
        if self.grid.size < 2 or np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing with at least two points")
        if self.values.shape != self.derivs.shape or self.values.shape[0] != self.grid.size:
            raise ValueError("values and derivatives must match the grid")
        self.dense = dense
        self.derivative_fn = derivative_fn
        m = self.values.shape[1]
        self.names = list(names) if names else [f"y{i}" for i in range(m)]
        self.meta = dict(meta or {})

    @property
    def span(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])

    @property
    def size(self) -> int:
        return self.values.shape[1]

    def _check(self, s: float) -> None:
        lo, hi = self.span
        slack = SPAN_SLACK * max(1.0, abs(lo), abs(hi))
        if not (lo - slack <= s <= hi + slack):
            raise DomainViolationError(f"{s!r} lies outside the sampled span [{lo}, {hi}]")

    def _hermite(self, s: float, derivative: bool = False) -> np.ndarray:
        i = int(np.clip(np.searchsorted(self.grid, s) - 1, 0, self.grid.size - 2))
        t0, t1 = self.grid[i], self.grid[i + 1]
        hstep = t1 - t0
        th = (s - t0) / hstep
        y0, y1 = self.values[i], self.values[i + 1]
        d0, d1 = self.derivs[i] * hstep, self.derivs[i + 1] * hstep
        if derivative:
            h00, h10, h01, h11 = 6 * th**2 - 6 * th, 3 * th**2 - 4 * th + 1, -6 * th**2 + 6 * th, 3 * th**2 - 2 * th
            return (h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1) / hstep
        h00 = 2 * th**3 - 3 * th**2 + 1
        h10 = th**3 - 2 * th**2 + th
        h01 = -2 * th**3 + 3 * th**2
        h11 = th**3 - th**2
        return h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1

    def __call__(self, s: float) -> np.ndarray:
        s = float(s)
        self._check(s)
        if self.dense is not None:
            return np.asarray(self.dense(s), dtype=float).reshape(-1)
        return self._hermite(s)

    def derivative(self, s: float) -> np.ndarray:
        s = float(s)
        self._check(s)
        if self.derivative_fn is not None:
            return np.asarray(self.derivative_fn(s), dtype=float).reshape(-1)
        return self._hermite(s, derivative=True)

    def component(self, i: int) -> Callable[[float], float]:
        return lambda s: float(self(s)[i])

    def scaled(self, factor: float) -> "SampledFunction":
        """Values multiplied by ``factor``; derivatives left untouched.

        This is the negative-control perturbation: the result no longer
        solves the equation that produced it.
        """
        dense = None if self.dense is None else (lambda s, d=self.dense: factor * np.asarray(d(s)))
        deriv_fn = self.derivative_fn
        if deriv_fn is None:
            deriv_fn = lambda s, me=self: me._hermite(s, derivative=True)  # noqa: E731
        return SampledFunction(
            self.grid, self.values * factor, self.derivs, dense, deriv_fn, self.names,
            {**self.meta, "scaled_by": factor},
        )

    def to_text(self, columns: Sequence[int] | None = None) -> str:
        """Columnar text: ``#`` header lines with metadata, then one row per grid point.

        The default columns are the grid variable, every value and the
        derivative of the first component.
        """
        buf = io.StringIO()
        buf.write("# sampled-function 1\n")
        for k in sorted(self.meta):
            buf.write(f"# {k}: {self.meta[k]!r}\n")
        cols = list(range(self.size)) if columns is None else list(columns)
        head = ["s"] + [self.names[i] for i in cols] + [f"d({self.names[i]})" for i in cols]
        buf.write("# columns: " + " ".join(head) + "\n")
        for j, s in enumerate(self.grid):
            row = [s] + [self.values[j, i] for i in cols] + [self.derivs[j, i] for i in cols]
            buf.write(" ".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "SampledFunction":
        import ast

        meta: dict = {}
        head: list = []
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("columns:"):
                    head = body[len("columns:"):].split()
                elif ":" in body:
                    k, v = body.split(":", 1)
                    try:
                        meta[k.strip()] = ast.literal_eval(v.strip())
                    except (ValueError, SyntaxError):
                        meta[k.strip()] = v.strip()
                continue
            rows.append([float(v) for v in line.split()])
        data = np.array(rows)
        m = (data.shape[1] - 1) // 2
        names = head[1 : 1 + m] if head else None
        return cls(data[:, 0], data[:, 1 : 1 + m], data[:, 1 + m :], names=names, meta=meta)


# ---------------------------------------------------------------------------
# integration


def integrate_ode(
    rhs: Callable,
    y0,
    span,
    tol: float = DEFAULT_TOL,
    method: str = "DOP853",
    fixed_step: float | None = None,
    names: Sequence[str] | None = None,
    max_step: float = math.inf,
) -> SampledFunction:
    """Integrate y' = rhs(s, y) over ``span`` with error control at ``tol``.

    ``fixed_step`` disables error control and takes equal steps (used to
    measure the convergence order). Integration may run backwards; the
    result is always stored on an increasing grid.
    """
    if not (1e-13 <= tol <= 1e-3):
        raise ValueError("tol must lie in [1e-13, 1e-3]")
    y0 = np.asarray(y0, dtype=float).reshape(-1)
    if not np.all(np.isfinite(y0)):
        raise ValueError("initial values must be finite")
    s0, s1 = float(span[0]), float(span[1])
    if s0 == s1:
        raise ValueError("empty integration span")

    def f(s, y):
        return np.asarray(rhs(s, y), dtype=float)

    kwargs = {"rtol": tol, "atol": tol, "max_step": max_step}
    if fixed_step is not None:
        nsteps = max(1, round(abs(s1 - s0) / fixed_step))
        hstep = abs(s1 - s0) / nsteps
        kwargs = {"rtol": 1e6, "atol": 1e6, "first_step": hstep, "max_step": hstep}
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        try:
            sol = solve_ivp(f, (s0, s1), y0, method=method, dense_output=True, **kwargs)
        except (FloatingPointError, OverflowError, EvalDomainError) as exc:
            raise BlowUpError(f"integration failed: {exc}", None) from None
    if sol.status != 0:
        where = float(sol.t[-1])
        big = float(np.max(np.abs(sol.y[:, -1])))
        if big > 1e8 or "step size" in sol.message:
            raise BlowUpError(f"integration stopped near s = {where:.6g}: {sol.message}", where)
        raise IntegrationError(sol.message, where)
    grid = sol.t
    ys = sol.y.T
    ds = np.array([f(s, y) for s, y in zip(grid, ys)])
    if grid[0] > grid[-1]:
        grid, ys, ds = grid[::-1], ys[::-1], ds[::-1]
    dense = sol.sol
    return SampledFunction(
        grid, ys, ds, dense=lambda s: dense(s), derivative_fn=lambda s: f(s, dense(s)), names=names,
        meta={"tol": tol, "method": method, "span": [s0, s1]},
    )


def convergence_slope(rhs: Callable, y0, span, exact: Callable, steps: Sequence[float],
                      method: str = "RK45") -> float:
    """Least-squares slope of log(global error) against log(step) at the span end."""
    errs = []
    for hstep in steps:
        sf = integrate_ode(rhs, y0, span, method=method, fixed_step=hstep)
        errs.append(float(np.max(np.abs(sf(span[1]) - np.asarray(exact(span[1]))))))
    return float(np.polyfit(np.log(steps), np.log(errs), 1)[0])


# ---------------------------------------------------------------------------
# PDE residual by finite differences


def _d1(g: Callable, s: float, hstep: float) -> float:
    return (-g(s + 2 * hstep) + 8 * g(s + hstep) - 8 * g(s - hstep) + g(s - 2 * hstep)) / (12 * hstep)


def _d2(g: Callable, s: float, hstep: float) -> float:
    return (-g(s + 2 * hstep) + 16 * g(s + hstep) - 30 * g(s) + 16 * g(s - hstep) - g(s - 2 * hstep)) / (
        12 * hstep * hstep
    )


def _d4(g: Callable, s: float, hstep: float) -> float:
    w = (-1, 12, -39, 56, -39, 12, -1)
    return sum(c * g(s + (k - 3) * hstep) for k, c in enumerate(w)) / (6 * hstep**4)


def _richardson(stencil, g, s, hstep, order=4) -> float:
    coarse = stencil(g, s, hstep)
    fine = stencil(g, s, hstep / 2)
    return (2**order * fine - coarse) / (2**order - 1)


def _f_expr(f) -> Expr | None:
    from .classify import FFamily

    if f is None:
        return as_expr(0)
    if isinstance(f, FFamily):
        return f.f_expr()
    if callable(f) and not isinstance(f, Expr):
        return None
    return normalize(as_expr(f))


def _f_derivatives(f) -> tuple:
    """f, f' and f'' as float callables (finite differences for plain callables)."""
    e = _f_expr(f)
    if e is None:
        g = f
        return g, (lambda v: _richardson(_d1, g, v, STEP_2)), (lambda v: _richardson(_d2, g, v, STEP_2))
    cs = [compiled(normalize(d), [u]) for d in (e, diff(e, u), diff(e, u, 2))]
    return tuple((lambda v, c=c: c([v])) for c in cs)


@dataclass
class Steps:
    """Finite-difference steps; ``dx4`` is used for the fourth x-derivative."""

    dx: float = STEP_2
    dt: float = STEP_2
    dx4: float = STEP_4
    richardson: bool = True

    def as_dict(self) -> dict:
        return {"dx": self.dx, "dt": self.dt, "dx4": self.dx4, "richardson": self.richardson}


def _pointwise(uf: Callable, fs, X: float, T: float, st: Steps) -> float:
    if hasattr(uf, "derivatives"):
        d = uf.derivatives(X, T)
        _, f1, f2 = fs
        U = d["u"]
        return d["u_tt"] - d["u_xx"] + f2(U) * d["u_x"] ** 2 + f1(U) * d["u_xx"] + d["u_xxxx"]
    fu = fs[0]
    def along_x(g):
        return lambda s: g(s, T)

    ux = along_x(uf)
    ut = lambda s: uf(X, s)  # noqa: E731
    fx = lambda s: fu(uf(s, T))  # noqa: E731
    if st.richardson:
        utt = _richardson(_d2, ut, T, st.dt)
        uxx = _richardson(_d2, ux, X, st.dx)
        fxx = _richardson(_d2, fx, X, st.dx)
        uxxxx = _richardson(_d4, ux, X, st.dx4)
    else:
        utt, uxx, fxx, uxxxx = _d2(ut, T, st.dt), _d2(ux, X, st.dx), _d2(fx, X, st.dx), _d4(ux, X, st.dx4)
    return utt - uxx + fxx + uxxxx


def pde_residual(
    uf: Callable,
    f,
    points: Sequence[tuple[float, float]],
    steps: Steps | None = None,
    tol: float = 1e-5,
    threads: int = 1,
    label: str = "PDE residual",
) -> Report:
    """u_tt - u_xx + (f(u) + u_xx)_xx at each (x, t).

    Evaluators exposing ``derivatives(x, t)`` (lifted reductions) supply
    their own derivatives. Anything else is differentiated by central
    differences: five-point stencils for second derivatives, seven points
    for the fourth, each refined once by Richardson extrapolation.
    """
    st = steps or Steps()
    fs = _f_derivatives(f)
    route = "symbolic ansatz" if hasattr(uf, "derivatives") else "finite differences"
    pts = [(float(a), float(b)) for a, b in points]

    def one(pt):
        try:
            return _pointwise(uf, fs, pt[0], pt[1], st)
        except (ValueError, ZeroDivisionError, OverflowError, ArithmeticError) as exc:
            raise DomainViolationError(f"u cannot be evaluated near {pt}: {exc}") from None

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            vals = list(ex.map(one, pts))
    else:
        vals = [one(p) for p in pts]
    settings = {"points": len(pts), "route": route}
    if route == "finite differences":
        settings["steps"] = st.as_dict()
    return _grid_report(label, pts, vals, tol, settings)


def _grid_report(label: str, pts, vals, tol: float, settings: dict) -> Report:
    worst = max((abs(v) for v in vals), default=0.0)
    ok = all(math.isfinite(v) for v in vals) and worst <= tol
    rep = Report(label, ok, worst, tol, settings=settings)
    k = int(np.argmax(np.abs(vals))) if vals else 0
    if vals:
        rep.add_row(worst_point=list(pts[k]), residual=vals[k], mean_abs=float(np.mean(np.abs(vals))))
    return rep


def grid_points(xs: Sequence[float], ts: Sequence[float]) -> list:
    return [(a, b) for b in ts for a in xs]


def linspace_grid(x_range, t_range, nx: int = 21, nt: int = 21) -> list:
    return grid_points(np.linspace(*x_range, nx), np.linspace(*t_range, nt))


# ---------------------------------------------------------------------------
# reductions


class LiftedSolution:
    """u(x, t) = U(x, t, h(z(x, t))) for a reduction and a sampled profile.

    The profile carries h, h', h'', h''' as components and h'''' is its
    derivative. ``derivatives`` differentiates the ansatz symbolically and
    reads the profile, so no finite differences touch the interpolant.
    """

    ORDERS = {"u": (0, 0), "u_x": (1, 0), "u_xx": (2, 0), "u_xxxx": (4, 0), "u_t": (0, 1), "u_tt": (0, 2)}

    def __init__(self, red, h: SampledFunction):
        from .reduce import hfun

        if h.size < 4:
            raise ValueError("profile must carry h and its first three derivatives")
        self.red = red
        self.h = h
        zx, zt = diff(red.z, x), diff(red.z, t)

        def Dx(e):
            return normalize(diff(e, x) + zx * diff(e, z))

        def Dt(e):
            return normalize(diff(e, t) + zt * diff(e, z))

        inputs = [x, t] + [hfun(k) for k in range(5)]
        self._z = compiled(red.z, [x, t])
        self._c = {}
        for name, (nx, nt) in self.ORDERS.items():
            e = normalize(red.ansatz)
            for _ in range(nx):
                e = Dx(e)
            for _ in range(nt):
                e = Dt(e)
            self._c[name] = compiled(e, inputs)

    def _inputs(self, X: float, T: float) -> list:
        Z = self._z([X, T])
        y = self.h(Z)
        return [X, T, y[0], y[1], y[2], y[3], self.h.derivative(Z)[3]]

    def __call__(self, X: float, T: float) -> float:
        return self._c["u"](self._inputs(X, T))

    def derivatives(self, X: float, T: float) -> dict:
        vals = self._inputs(X, T)
        return {k: c(vals) for k, c in self._c.items()}


def lift(red, h: SampledFunction) -> LiftedSolution:
    return LiftedSolution(red, h)


def verify_reduction(red, h: SampledFunction, points, tol: float = 1e-5, ode_tol: float = 1e-8,
                     check_ode: bool = True, threads: int = 1) -> Report:
    """Lift h through the reduction's ansatz and evaluate the PDE on the points.

    Passes when the residual is within ``tol`` and, if ``check_ode``, the
    profile solves the reduced ODE to ``ode_tol`` along its span.
    """
    from .reduce import hfun

    rep = pde_residual(lift(red, h), red.f, points, tol=tol, threads=threads, label="reduction residual")
    rep.settings["reduction"] = red.kind
    if check_ode:
        ode_c = compiled(red.ode, [z] + [hfun(k) for k in range(5)])
        worst = 0.0
        for s in np.linspace(*h.span, 41):
            y = h(s)
            worst = max(worst, abs(ode_c([s, y[0], y[1], y[2], y[3], h.derivative(s)[3]])))
        rep.settings["ode_residual"] = worst
        if worst > ode_tol:
            rep.passed = False
            rep.notes.append(f"profile does not solve the reduced ODE (residual {worst:.3g})")
    return rep


def ode_system(ode: Expr) -> Callable:
    """First-order system for a monic fourth-order ODE in h(z)."""
    from .reduce import hfun, leading_coefficient

    lead = normalize(leading_coefficient(ode))
    if lead != as_expr(1):
        raise ValueError("ODE must be monic in h''''")
    hs = [hfun(k) for k in range(4)]
    rest = normalize(ode - hfun(4))
    c = compiled(normalize(-rest), [z, *hs])

    def rhs(s, y):
        return [y[1], y[2], y[3], c([s, y[0], y[1], y[2], y[3]])]

    return rhs


# ---------------------------------------------------------------------------
# invariant surface condition


def verify_surface_condition(p: Callable, r: Callable, uf: Callable, points, tol: float = 1e-7,
                             step: float = STEP_2) -> Report:
    """max |p*u_x + u_t - r| over the points (q normalized to 1)."""
    pts = [(float(a), float(b)) for a, b in points]
    vals = []
    for X, T in pts:
        U = uf(X, T)
        ux = _richardson(_d1, lambda s: uf(s, T), X, step)
        ut = _richardson(_d1, lambda s: uf(X, s), T, step)
        vals.append(p(X, T, U) * ux + ut - r(X, T, U))
    return _grid_report("surface condition", pts, vals, tol, {"points": len(pts), "step": step})


@dataclass
class InvariantSurface:
    """u(x, t) solving p*u_x + u_t = r by characteristics from u(x, t0) = g(x)."""

    p: Callable
    r: Callable
    initial: Callable
    t0: float
    tol: float = 1e-11
    cache: dict = field(default_factory=dict)

    def __call__(self, X: float, T: float) -> float:
        # trace the characteristic through (X, T) back to t0, then forward for u
        key = (X, T)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if T == self.t0:
            return float(self.initial(X))

        def back(s, y):
            return [self.p(y[0], s, 0.0)]

        # p may depend on u; integrate x and u jointly, shooting on the foot
        def forward(foot):
            def rhs(s, y):
                return [self.p(y[0], s, y[1]), self.r(y[0], s, y[1])]

            sol = solve_ivp(rhs, (self.t0, T), [foot, float(self.initial(foot))], method="DOP853",
                            rtol=self.tol, atol=self.tol)
            if sol.status != 0:
                raise IntegrationError(sol.message, float(sol.t[-1]))
            return sol.y[:, -1]

        guess = solve_ivp(back, (T, self.t0), [X], method="DOP853", rtol=self.tol, atol=self.tol).y[0, -1]
        foot = float(guess)
        for _ in range(50):
            end = forward(foot)
            miss = end[0] - X
            if abs(miss) < 1e-12 * max(1.0, abs(X)):
                break
            eps = 1e-6 * max(1.0, abs(foot))
            slope = (forward(foot + eps)[0] - end[0]) / eps
            if slope == 0:
                raise IntegrationError("characteristic shooting stalled", T)
            foot -= miss / slope
        else:
            raise IntegrationError("characteristic shooting did not converge", T)
        val = float(forward(foot)[1])
        self.cache[key] = val
        return val

