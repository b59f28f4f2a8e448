import math
import random

import numpy as np
import pytest

from boussym.closedform import (
    NonclassicalAnsatz,
    QuadratureSolution,
    WeierstrassParams,
    invert_quadrature,
    nonclassical_expressions,
    nonclassical_fields,
    profile_residuals,
    quadrature_check,
    quadrature_profile,
    quadrature_relation,
    solve_h,
    weierstrass,
    weierstrass_identity_residual,
    weierstrass_profile_check,
)
from boussym.determining import Candidate, FSpec, build_nonclassical, residuals
from boussym.errors import BlowUpError, DomainViolationError, PoleProximityError
from boussym.expr import Num, diff, equiv, normalize, parse, t
from boussym.numverify import integrate_ode

# ---------------------------------------------------------------------------
# Weierstrass


def test_degenerate_lattice_is_inverse_square():
    wp = WeierstrassParams(0.0, 0.0)
    for zz in (0.1, 0.7, 3.0, -2.5):
        p, dp = weierstrass(zz, wp)
        assert abs(p - 1 / zz**2) <= 1e-10 * max(1.0, 1 / zz**2)
        assert abs(dp + 2 / zz**3) <= 1e-9 * max(1.0, abs(2 / zz**3))


def test_identity_at_random_invariants():
    rng = random.Random(7)
    worst = 0.0
    for _ in range(10):
        wp = WeierstrassParams(rng.uniform(-3, 3), rng.uniform(-3, 3))
        for _ in range(100):
            try:
                worst = max(worst, weierstrass_identity_residual(rng.uniform(0.05, 3.0), wp))
            except PoleProximityError:
                pass
    assert worst <= 1e-9


def test_weierstrass_is_even_with_odd_derivative():
    wp = WeierstrassParams(1.3, -0.4)
    p1, d1 = weierstrass(0.9, wp)
    p2, d2 = weierstrass(-0.9, wp)
    assert p1 == pytest.approx(p2, rel=1e-13)
    assert d1 == pytest.approx(-d2, rel=1e-13)


def test_weierstrass_solves_its_second_order_equation():
    # P'' = 6 P^2 - g2/2, integrated from z = 0.4
    wp = WeierstrassParams(2.0, 1.0)
    p0, dp0 = weierstrass(0.4, wp)
    sf = integrate_ode(lambda s, y: [y[1], 6 * y[0] ** 2 - wp.g2 / 2], [p0, dp0], (0.4, 1.2), tol=1e-12)
    for zz in np.linspace(0.4, 1.2, 9):
        ref = weierstrass(zz, wp)[0]
        assert abs(sf(zz)[0] - ref) <= 1e-8 * max(1.0, abs(ref))


def test_pole_proximity():
    with pytest.raises(PoleProximityError):
        weierstrass(1e-8, WeierstrassParams(1.0, 1.0))


# ---------------------------------------------------------------------------
# travelling-wave quadrature


CUBIC = QuadratureSolution(n=3, a=1, d=0.5, b=0.2, k2=-0.3, k3=-1.0, sign=1, h_ref=0.1)


def test_reference_point_maps_to_minus_k4():
    qs = QuadratureSolution(n=2, a=1, d=-1, b=0, k2=0, k3=-1, k4=0.25, h_ref=0.3)
    assert quadrature_relation(qs, 0.3) == -0.25


def test_relation_is_monotone_and_invertible():
    hs = np.linspace(0.1, 0.8, 15)
    zs = [quadrature_relation(CUBIC, h) for h in hs]
    assert all(b > a for a, b in zip(zs, zs[1:]))
    assert invert_quadrature(CUBIC, zs[7], 0.1, 0.8) == pytest.approx(hs[7], abs=1e-12)


def test_quadrature_agrees_with_integration():
    rep = quadrature_check(CUBIC, 0.1, 0.8)
    assert rep.passed, rep.summary()


def test_quadrature_profile_solves_second_order_equation():
    sf = quadrature_profile(CUBIC, 0.1, 0.8, 41)
    for zz in np.linspace(*sf.span, 7):
        h, h1, h2, h3 = sf(zz)
        assert h2 == pytest.approx(CUBIC.k2 * -1 - CUBIC.d * (CUBIC.a * h + CUBIC.b) ** 3, abs=1e-12)
        assert h1 == pytest.approx(CUBIC.slope(h), abs=1e-12)


def test_log_branch_without_d_is_constant_acceleration():
    # n = -1, d = 0 leaves h'' = -k2: the profile is a parabola, not an oscillation
    qs = QuadratureSolution(n=-1, a=1, d=0, k2=-2.0, k3=1.0, h_ref=1.0)
    for h in (0.6, 1.0, 2.0, 3.5):
        zz = quadrature_relation(qs, h)
        assert zz == pytest.approx(math.sqrt(0.5) * (math.sqrt(2 * h - 1) - 1), abs=1e-12)
        assert qs.second(h) == 2.0
    assert quadrature_check(qs, 0.6, 3.5).passed


def test_quadrature_domain_errors():
    with pytest.raises(DomainViolationError):
        QuadratureSolution(n=-3, a=1, d=1)  # a*m/2 < 0
    with pytest.raises(DomainViolationError):
        quadrature_relation(QuadratureSolution(n=2, a=1, d=1, k3=1, h_ref=0.5), 1.0)
    with pytest.raises(DomainViolationError):
        invert_quadrature(CUBIC, 100.0, 0.1, 0.8)


def test_f_expr_is_exact():
    assert equiv(CUBIC.f_expr(k=1), parse("1/2*(u + 1/5)^3 + u"))


# ---------------------------------------------------------------------------
# the time profile (h')^2 = k3 h^3 + k4


def test_linear_branch():
    sf = solve_h(0.0, 4.0, (0, 2), 1.0)
    assert sf.meta["branch"] == "linear"
    assert sf(1.5)[0] == pytest.approx(4.0, abs=1e-12)


@pytest.mark.parametrize("closed_form", [True, False])
def test_rational_branch(closed_form):
    sf = solve_h(1.0, 0.0, (1, 3), 4.0, sign=-1, closed_form=closed_form)
    assert max(abs(sf(s)[0] - 4 / s**2) for s in np.linspace(1, 3, 50)) <= 1e-7


def test_general_branch_residual():
    sf = solve_h(1.0, 1.0, (0, 1), 1.0)
    res = profile_residuals(sf, 1.0, 1.0)
    assert res["first_order"] <= 1e-8 and res["second_order"] <= 1e-8


def test_general_branch_through_turning_point():
    # k4 < 0 lets h' pass through zero; the second-order form handles it
    sf = solve_h(1.0, -1.0, (0, 1.5), 1.2, sign=-1)
    assert np.any(sf.values[:, 1] > 0) and np.any(sf.values[:, 1] < 0)
    assert profile_residuals(sf, 1.0, -1.0)["first_order"] <= 1e-8


def test_blow_up_and_inconsistent_data():
    with pytest.raises(BlowUpError) as info:
        solve_h(1.0, 0.0, (0, 3), 4.0, sign=1)
    assert info.value.location == pytest.approx(1.0)
    with pytest.raises(BlowUpError):
        solve_h(1.0, 1.0, (0, 5), 1.0, closed_form=False)
    with pytest.raises(DomainViolationError):
        solve_h(1.0, -2.0, (0, 1), 1.0)
    with pytest.raises(ValueError):
        solve_h(1.0, 0.0, (1, 0), 1.0)


@pytest.mark.parametrize("k3, k4, s0", [(1.0, 1.0, 0.3), (2.0, -0.5, 0.5), (-1.5, 2.0, 0.4)])
def test_time_profile_is_a_scaled_weierstrass_function(k3, k4, s0):
    rep = weierstrass_profile_check(k3, k4, s0, 0.6)
    assert rep.passed, rep.summary()


# ---------------------------------------------------------------------------
# nonclassical infinitesimals


def _ansatz(b, d, k1, k2):
    h = solve_h(1.0, 0.0, (0.2, 3), 4 / 0.2**2, sign=-1)
    return NonclassicalAnsatz(b, d, k1, k2, 1.0, 0.0, h)


@pytest.mark.parametrize("b, d", [(0.7, 1.3), (-0.4, 0.6)])
def test_consistent_fields_satisfy_the_determining_equations(b, d):
    S = build_nonclassical(FSpec.concrete(parse(f"{d}*u^2 + {b}*u + 3/10")))
    p, r = nonclassical_fields(_ansatz(b, d, 0.4, 0.5), "consistent")
    rep = residuals(S, Candidate(p, r), trials=100)
    assert rep.passed and rep.max_residual <= 1e-8, rep.summary()


def test_printed_fields_do_not():
    b, d = 0.7, 1.3
    S = build_nonclassical(FSpec.concrete(parse(f"{d}*u^2 + {b}*u + 3/10")))
    p, r = nonclassical_fields(_ansatz(b, d, 0.4, 0.5), "printed")
    rep = residuals(S, Candidate(p, r), trials=100)
    assert not rep.passed and rep.max_residual > 1e-3


def test_field_structure():
    p, r = nonclassical_expressions(1, 2, 0, 3, "consistent")
    # with k1 = 0 the x-independent part of p is k2 times its x-coefficient
    p1 = normalize(diff(p, "x"))
    assert normalize(p - p1 * parse("x") - 3 * p1) == Num(0)
    assert normalize(diff(r, "u") + 2 * p1) == Num(0)


def test_elementary_profile_gives_p1():
    # h = 4/(k3 t^2): h'/(2h) = -1/t
    na = _ansatz(0.7, 1.3, 0.0, 0.0)
    p, _ = nonclassical_fields(na, "consistent")
    for T in (0.5, 1.0, 2.5):
        assert p(2.0, T, 0.0) == pytest.approx(-2.0 / T, rel=1e-10)


def test_ansatz_validation():
    h = solve_h(1.0, 0.0, (0.2, 3), 100.0, sign=-1)
    with pytest.raises(ValueError):
        NonclassicalAnsatz(1, 0, 0, 0, 1.0, 0.0, h)
    with pytest.raises(ValueError):
        NonclassicalAnsatz(1, 1, 0, 0, 1.0, 5.0, h)
    with pytest.raises(ValueError):
        nonclassical_expressions(1, 1, 0, 0, "other")


def test_time_variable_only():
    p, r = nonclassical_expressions(1, 2, 1, 1, "printed")
    assert t in p.free_symbols()


def test_invariant_surface_of_the_corrected_fields():
    from boussym.numverify import InvariantSurface, verify_surface_condition

    p, r = nonclassical_fields(_ansatz(0.7, 1.3, 0.4, 0.5), "consistent")
    surf = InvariantSurface(p, r, lambda X: 0.5 + 0.1 * X * X, 1.0)
    pts = [(a, b) for a in (0.5, 1.0) for b in (1.2, 1.5)]
    rep = verify_surface_condition(p, r, surf, pts, tol=1e-6)
    assert rep.passed, rep.summary()
