"""Command-line front end.

Every subcommand writes one JSON document (``schema: 1``, sorted keys) to
standard output or ``--out``. Exit status: 0 when every check passes, 2 when
a check fails, 1 on usage or parse errors (diagnostic on standard error).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .errors import BlowUpError, BoussymError, ParseError
from .expr import DEFAULT_SEED, Fn, as_expr, iter_nodes, compiled, diff, normalize, parse, render, substitute, t, x, z
from .report import json_clean

SCHEMA = 1
PARAM_FLAGS = ("n", "a", "b", "c", "d", "k", "lambda", "k1", "k2", "k3", "k4")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# argument helpers


def _binding(args) -> dict:
    out = {}
    for name in PARAM_FLAGS:
        v = getattr(args, name.replace("lambda", "lam"), None)
        if v is not None:
            out[name] = normalize(parse(v))
    return out


def _bound(text: str, binding: dict):
    e = parse(text)
    names = {s.name for s in e.free_symbols()}
    sub = {k: v for k, v in binding.items() if k in names}
    return substitute(e, sub) if sub else e


def _number(e, what: str) -> float:
    e = normalize(as_expr(e))
    if e.free_symbols():
        raise UsageError(f"{what} needs numeric values, got {render(e)}")
    try:
        return float(compiled(e, [])([]))
    except (ArithmeticError, ValueError) as exc:
        raise UsageError(f"{what} does not evaluate to a real number: {exc}") from None


def _flag_value(binding: dict, name: str, default=None) -> float | None:
    if name not in binding:
        return default
    return _number(binding[name], f"--{name}")


def _require_numeric_f(f, what: str = "f") -> None:
    stray = sorted(s.name for s in f.free_symbols() if s.kind == "param")
    if stray:
        raise UsageError(f"{what} has unbound parameters {stray}; pass them with --a, --b, ...")


def _pair(text: str, what: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{what} must be two comma-separated numbers, got {text!r}") from None
    if not hi > lo:
        raise UsageError(f"{what} must be increasing")
    return lo, hi


# ---------------------------------------------------------------------------
# subcommands


def cmd_classify(args, binding) -> dict:
    from .classify import ansatz_solve_detail, detect_family, generators_for, same_span

    f = _bound(_need(args.f, "--f"), binding)
    fam = detect_family(f)
    table = generators_for(fam)
    found = ansatz_solve_detail(fam.fspec())
    same = same_span(found.generators, table, seed=args.seed)
    return {
        "passed": same,
        "family": fam.to_dict(),
        "generators": [g.render() for g in table],
        "ansatz": found.to_dict(),
        "same_span": same,
    }


def _system(method: str, f):
    from .determining import build_classical, build_nonclassical

    return build_classical(f) if method == "classical" else build_nonclassical(f)


def _f_or_symbolic(args, binding):
    return None if args.f is None else _bound(args.f, binding)


def cmd_determine(args, binding) -> dict:
    S = _system(args.method, _f_or_symbolic(args, binding))
    return {"passed": True, "system": S.to_dict()}


def cmd_verify_generator(args, binding) -> dict:
    from .determining import residuals
    from .jet import VectorField

    S = _system(args.method, _f_or_symbolic(args, binding))
    V = VectorField.parse(_need(args.gen, "--gen"))
    V = VectorField(*(_bound(render(c), binding) for c in (V.p, V.q, V.r)))
    rep = residuals(S, V, tol=args.tol or 1e-8, seed=args.seed)
    return {"passed": rep.passed, "generator": V.render(), "method": args.method, "report": rep.to_dict()}


def _reduction(args, binding):
    from .classify import detect_family, power_form
    from .reduce import scaling, travelling_wave

    f = _bound(_need(args.f, "--f"), binding)
    if "lambda" in binding:
        return travelling_wave(binding["lambda"], f), None
    fam = power_form(detect_family(f))
    return scaling(fam, seed=args.seed), fam


def cmd_reduce(args, binding) -> dict:
    from .classify import generators_for
    from .expr import Num
    from .jet import VectorField
    from .reduce import check_printed_ode, first_integral_report, printed_first_integral, verify_ansatz

    red, fam = _reduction(args, binding)
    doc = {"reduction": red.to_dict()}
    if fam is None:
        V = VectorField(binding["lambda"], 1, 0)
    else:
        V = generators_for(fam)[-1]
    checks = [verify_ansatz(red, V, seed=args.seed)]
    doc["ansatz_check"] = checks[0].to_dict()
    if fam is not None:
        params = {k: v for k, v in fam.params.items() if k in ("a", "b", "c", "d", "n")}
        verdict = check_printed_ode(fam.tag, params, seed=args.seed, tol=args.tol or 1e-9)
        checks.append(verdict)
        doc["printed_ode_check"] = verdict.to_dict()
        n = fam.params.get("n")
        if fam.tag == "power" and n in (Num(2), Num(3), Num(-1)):
            ode, cand, mult = printed_first_integral(int(n.value))
            fi = first_integral_report(ode, cand, mult, seed=args.seed, tol=args.tol or 1e-9)
            checks.append(fi)
            doc["first_integral"] = fi.to_dict()
    doc["passed"] = all(c.passed for c in checks)
    return doc


def cmd_solve(args, binding) -> dict:
    if "n" in binding:
        return _solve_quadrature(args, binding)
    return _solve_time_profile(args, binding)


def _solve_quadrature(args, binding) -> dict:
    from .closedform import QuadratureSolution, quadrature_check, quadrature_profile, quadrature_relation

    if args.h_range is None:
        raise UsageError("the quadrature needs --h-range LO,HI")
    lo, hi = _pair(args.h_range, "--h-range")
    qs = QuadratureSolution(
        n=_flag_value(binding, "n"),
        a=_flag_value(binding, "a", 1.0),
        d=_flag_value(binding, "d", 1.0),
        b=_flag_value(binding, "b", 0.0),
        k2=_flag_value(binding, "k2", 0.0),
        k3=_flag_value(binding, "k3", 0.0),
        k4=_flag_value(binding, "k4", 0.0),
        sign=args.sign,
        h_ref=lo if args.h_ref is None else args.h_ref,
    )
    sf = quadrature_profile(qs, lo, hi, args.points)
    rep = quadrature_check(qs, lo, hi, tol=args.tol or 1e-6)
    zs = [quadrature_relation(qs, h) for h in np.linspace(lo, hi, 33)]
    monotone = bool(np.all(np.diff(zs) > 0) or np.all(np.diff(zs) < 0))
    return {
        "passed": rep.passed and monotone,
        "kind": "quadrature",
        "monotone": monotone,
        "check": rep.to_dict(),
        "profile": sf.to_text(),
    }


def _solve_time_profile(args, binding) -> dict:
    from .closedform import profile_residuals, solve_h

    if "k3" not in binding and "k4" not in binding:
        raise UsageError("solve needs --n (quadrature) or --k3/--k4 (time profile)")
    k3 = _flag_value(binding, "k3", 0.0)
    k4 = _flag_value(binding, "k4", 0.0)
    span = _pair(args.t_range or "0,1", "--t-range")
    try:
        sf = solve_h(k3, k4, span, args.h0, sign=args.sign, points=args.points)
    except BlowUpError as exc:
        return {"passed": False, "kind": "time_profile", "error": str(exc), "blow_up_time": exc.location}
    res = profile_residuals(sf, k3, k4)
    scale = 1.0 + float(np.max(np.abs(sf.values[:, 0]))) ** 3
    tol = args.tol or 1e-8
    passed = res["first_order"] <= tol * scale and res["second_order"] <= 10 * tol * scale
    return {
        "passed": passed,
        "kind": "time_profile",
        "branch": sf.meta.get("branch"),
        "residuals": res,
        "tolerance": tol,
        "residual_scale": scale,
        "profile": sf.to_text(),
    }


def cmd_residual(args, binding) -> dict:
    from .numverify import linspace_grid, pde_residual

    if args.u is not None:
        f = _bound(_need(args.f, "--f"), binding)
        _require_numeric_f(f)
        ue = _bound(args.u, binding)
        stray = sorted(s.name for s in ue.free_symbols() if s not in (x, t))
        stray += sorted({n.name for n in iter_nodes(ue) if isinstance(n, Fn)})
        if stray:
            raise UsageError(f"--u may use only x, t and the grammar's functions, found {stray}")
        c = compiled(ue, [x, t])
        pts = linspace_grid(_pair(args.x_range or "-2,2", "--x-range"), _pair(args.t_range or "0,3", "--t-range"),
                            args.nx, args.nt)
        rep = pde_residual(lambda X, T: c([X, T]), f, pts, tol=args.tol or 1e-5, threads=args.threads)
        return {"passed": rep.passed, "u": render(ue), "report": rep.to_dict()}
    return _reduction_residual(args, binding)


def _reduction_residual(args, binding) -> dict:
    from .numverify import integrate_ode, linspace_grid, ode_system, verify_reduction
    from .reduce import K1, K2, hfun

    red, fam = _reduction(args, binding)
    _require_numeric_f(red.f)
    travelling = fam is None
    xr = _pair(args.x_range or ("-2,2" if travelling else "1,2"), "--x-range")
    tr = _pair(args.t_range or ("0,3" if travelling else "1,2"), "--t-range")
    if not travelling and tr[0] <= 0:
        raise UsageError("the scaling reduction needs t > 0")
    corners = [_number(substitute(red.z, {x: a, t: b}), "z") for a in xr for b in tr]
    span = (min(corners) - 0.05, max(corners) + 0.05)
    if args.y0 is not None:
        y0 = [float(v) for v in args.y0.split(",")]
        if len(y0) != 4:
            raise UsageError("--y0 needs four values h, h', h'', h'''")
    elif travelling:
        ks = {K1: _flag_value(binding, "k1", 0.0), K2: _flag_value(binding, "k2", 0.0)}
        integ = normalize(substitute(red.integrated, ks))
        inputs = [z] + [hfun(k) for k in range(4)]
        h0 = 0.5
        h2 = -compiled(integ, inputs)([span[0], h0, 0.0, 0.0, 0.0])
        h3 = -compiled(normalize(diff(integ, z)), inputs)([span[0], h0, 0.0, 0.0, 0.0])
        y0 = [h0, 0.0, h2, h3]
    else:
        y0 = [1.0, 0.1, 0.0, 0.0]
    sf = integrate_ode(ode_system(red.ode), y0, span, tol=1e-11)
    pts = linspace_grid(xr, tr, args.nx, args.nt)
    rep = verify_reduction(red, sf, pts, tol=args.tol or 1e-5, threads=args.threads)
    return {
        "passed": rep.passed,
        "reduction": red.to_dict(),
        "initial_values": y0,
        "z_span": list(span),
        "report": rep.to_dict(),
    }


def _need(value, flag: str):
    if value is None:
        raise UsageError(f"{flag} is required")
    return value


COMMANDS = {
    "classify": cmd_classify,
    "determine": cmd_determine,
    "verify-generator": cmd_verify_generator,
    "reduce": cmd_reduce,
    "solve": cmd_solve,
    "residual": cmd_residual,
}


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--f", help="nonlinearity f(u), e.g. 'd*(a*u+b)^n + u + c'")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default {DEFAULT_SEED})")
    common.add_argument("--tol", type=float, help="tolerance (each subcommand has its own default)")
    common.add_argument("--out", help="write JSON here instead of standard output")
    common.add_argument("--threads", type=int, default=1, help="worker threads for residual grids")
    for name in PARAM_FLAGS:
        dest = "lam" if name == "lambda" else name
        common.add_argument(f"--{name}", dest=dest, help=f"value of parameter {name} (exact, e.g. 3/2)")

    parser = _Parser(prog="boussym", description="Symmetry analysis of u_tt - u_xx + (f(u) + u_xx)_xx = 0.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sub.add_parser("classify", parents=[common], help="family of f, its generators and the ansatz solution")
    for name in ("determine", "verify-generator"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--method", choices=("classical", "nonclassical"), default="classical")
        if name == "verify-generator":
            p.add_argument("--gen", help="generator such as 'x*dx + 2*t*dt - (2/a)*du'")
    sub.add_parser("reduce", parents=[common], help="reduced ODE and verdicts on its printed form")
    p = sub.add_parser("solve", parents=[common], help="closed-form or numeric profiles")
    p.add_argument("--h-range", help="h interval LO,HI for the quadrature")
    p.add_argument("--h-ref", type=float, help="quadrature reference point (default LO)")
    p.add_argument("--t-range", help="t interval LO,HI for the time profile (default 0,1)")
    p.add_argument("--h0", type=float, default=1.0, help="h at the start of the t interval")
    p.add_argument("--sign", type=int, choices=(1, -1), default=1, help="branch of the square root")
    p.add_argument("--points", type=int, default=101, help="samples in the emitted profile")
    p = sub.add_parser("residual", parents=[common], help="PDE residual of a solution on a grid")
    p.add_argument("--u", help="explicit u(x, t); without it the reduction selected by --f/--lambda is integrated")
    p.add_argument("--x-range", help="x interval LO,HI")
    p.add_argument("--t-range", help="t interval LO,HI")
    p.add_argument("--nx", type=int, default=21)
    p.add_argument("--nt", type=int, default=21)
    p.add_argument("--y0", help="initial h, h', h'', h''' for the reduced ODE")
    return parser


def run(argv=None) -> tuple[int, str, str | None]:
    """Execute one command.

    Returns the exit code, the JSON text ('' after a usage error) and the
    output path the text was written to, if any.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        binding = _binding(args)
        doc = COMMANDS[args.command](args, binding)
    except (UsageError, ParseError, ValueError) as exc:
        print(f"boussym: error: {exc}", file=sys.stderr)
        return 1, "", None
    except BoussymError as exc:
        doc = {"passed": False, "error": f"{type(exc).__name__}: {exc}"}
    doc["schema"] = SCHEMA
    doc["command"] = args.command
    doc["seed"] = args.seed
    text = json.dumps(json_clean(doc), sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return (0 if doc["passed"] else 2), text, args.out


def main(argv=None) -> int:
    code, text, out = run(argv)
    if text and out is None:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
