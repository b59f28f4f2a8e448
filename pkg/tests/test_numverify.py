import math
from fractions import Fraction

import numpy as np
import pytest

from boussym.classify import FFamily
from boussym.closedform import solve_h
from boussym.errors import BlowUpError, DomainViolationError
from boussym.expr import parse
from boussym.numverify import (
    InvariantSurface,
    SampledFunction,
    Steps,
    convergence_slope,
    integrate_ode,
    lift,
    linspace_grid,
    ode_system,
    pde_residual,
    verify_reduction,
    verify_surface_condition,
)
from boussym.reduce import scaling, travelling_wave

GRID = linspace_grid((-2, 2), (0, 3))


def oscillator(s, y):
    return [y[1], -y[0]]


def test_harmonic_oscillator():
    sf = integrate_ode(oscillator, [0, 1], (0, math.pi / 2))
    assert abs(sf(math.pi / 2)[0] - 1) <= 1e-9
    # dense output between grid points
    assert abs(sf(0.3)[0] - math.sin(0.3)) <= 1e-8
    assert abs(sf.derivative(0.3)[1] + math.sin(0.3)) <= 1e-8


def test_backward_integration_is_stored_increasing():
    sf = integrate_ode(oscillator, [1, 0], (1, -1))
    assert np.all(np.diff(sf.grid) > 0)
    assert abs(sf(-1)[0] - math.cos(2)) <= 1e-8


def test_convergence_slope_matches_rk45_order():
    slope = convergence_slope(oscillator, [0, 1], (0, 2), lambda s: [math.sin(s), math.cos(s)],
                              [0.2, 0.1, 0.05, 0.025], method="RK45")
    assert abs(slope - 5) <= 0.2 * 5


def test_energy_is_conserved_for_the_boussinesq_wave():
    def rhs(s, y):
        return [y[1], -y[0] ** 2 / 2 - y[0]]

    sf = integrate_ode(rhs, [0.5, 0], (0, 20), tol=1e-11)
    energy = [0.5 * v[1] ** 2 + v[0] ** 3 / 6 + v[0] ** 2 / 2 for v in sf.values]
    assert max(energy) - min(energy) <= 1e-8


def test_rational_profile_from_integration():
    sf = integrate_ode(lambda s, y: [y[1], 1.5 * y[0] ** 2], [4, -8], (1, 3), tol=1e-12)
    assert max(abs(sf(s)[0] - 4 / s**2) for s in np.linspace(1, 3, 30)) <= 1e-7


def test_integrator_errors():
    with pytest.raises(ValueError):
        integrate_ode(oscillator, [0, 1], (0, 1), tol=1e-2)
    with pytest.raises(ValueError):
        integrate_ode(oscillator, [0, float("nan")], (0, 1))
    with pytest.raises(BlowUpError) as info:
        integrate_ode(lambda s, y: [y[0] ** 2], [1.0], (0, 2))
    assert info.value.location == pytest.approx(1.0, abs=1e-2)


def test_sampled_function_domain_and_text_round_trip():
    sf = integrate_ode(oscillator, [0, 1], (0, 1), names=["h", "h'"])
    with pytest.raises(DomainViolationError):
        sf(1.5)
    back = SampledFunction.from_text(sf.to_text())
    assert np.array_equal(back.grid, sf.grid)
    assert np.array_equal(back.values, sf.values)
    assert back.names == ["h", "h'"]
    assert back.meta["method"] == "DOP853"
    # Hermite interpolation on the stored grid
    assert abs(back(0.37)[0] - math.sin(0.37)) <= 1e-4


def test_sampled_function_validation():
    with pytest.raises(ValueError):
        SampledFunction([0, 0], [1, 2], [0, 0])


def test_constant_has_zero_residual():
    rep = pde_residual(lambda X, T: 3.0, parse("u^2"), GRID)
    assert rep.passed and rep.max_residual == 0


def test_quartic_polynomial_derivatives_are_exact():
    # u = x^4/24 - t^2/2 gives u_tt = -1, u_xxxx = 1, u_xx = x^2/2
    def uf(X, T):
        return X**4 / 24 - T**2 / 2

    rep = pde_residual(uf, None, [(0.0, 0.0), (0.3, 1.0)], steps=Steps(richardson=False), tol=1e-10)
    # residual is -x^2/2
    assert rep.max_residual == pytest.approx(0.045, abs=1e-8)


def test_stencils_are_exact_on_quartics():
    from boussym.numverify import STEP_2, STEP_4, _d2, _d4

    def g(s):
        return 3 * s**4 - s**3 + 2

    # the stencils have no truncation error here, so a wide step isolates rounding
    for X in (0.0, 0.7, -1.3):
        assert abs(_d4(g, X, 0.25) - 72) <= 1e-10
        assert abs(_d2(g, X, 0.05) - (36 * X * X - 6 * X)) <= 1e-10
        # at the working steps rounding dominates
        assert abs(_d4(g, X, STEP_4) - 72) <= 1e-6
        assert abs(_d2(g, X, STEP_2) - (36 * X * X - 6 * X)) <= 1e-7


def test_linear_wave_by_finite_differences():
    # f = 0, lambda = 2: h'' + 3h = 0, so h = sin(sqrt(3) z) with z = x - 2t
    c = math.sqrt(3)
    rep = pde_residual(lambda X, T: math.sin(c * (X - 2 * T)), None, GRID)
    assert rep.passed and rep.max_residual <= 1e-5
    assert rep.settings["route"] == "finite differences"


def test_harmonic_case_with_sqrt2_speed():
    rep = pde_residual(lambda X, T: math.sin(X - math.sqrt(2) * T), None, GRID)
    assert rep.max_residual <= 1e-6


def test_wrong_wave_fails():
    rep = pde_residual(lambda X, T: math.sin(X - T), None, GRID)
    assert not rep.passed and rep.max_residual > 1e-2


def boussinesq_wave():
    red = travelling_wave(1, parse("u^2/2 + u"))
    sf = integrate_ode(ode_system(red.ode), [0.5, 0, -0.625, 0], (-12, 12), tol=1e-11)
    return red, sf


def test_travelling_wave_reduction_passes_and_perturbation_fails():
    red, sf = boussinesq_wave()
    rep = verify_reduction(red, sf, GRID)
    assert rep.passed, rep.summary()
    assert rep.settings["route"] == "symbolic ansatz"
    bad = verify_reduction(red, sf.scaled(1.01), GRID, check_ode=False)
    assert not bad.passed and bad.max_residual > 1e-2


def test_finite_differences_of_the_lifted_wave_are_noise_limited():
    red, sf = boussinesq_wave()
    uf = lift(red, sf)
    # hiding the symbolic derivatives forces the stencil route; interpolation
    # noise divided by step^4 bounds what it can resolve
    fd = pde_residual(lambda X, T: uf(X, T), red.f, GRID[::37])
    assert fd.settings["route"] == "finite differences"
    assert fd.max_residual <= 1e-3
    assert pde_residual(uf, red.f, GRID[::37]).max_residual <= 1e-7


def test_threads_give_identical_reports():
    red, sf = boussinesq_wave()
    a = verify_reduction(red, sf, GRID, threads=1)
    b = verify_reduction(red, sf, GRID, threads=4)
    assert a.to_json() == b.to_json()


@pytest.mark.parametrize("n", [2, 3])
def test_power_scaling_reduction(n):
    fam = FFamily("power", {"a": 1, "b": Fraction(1, 2), "c": Fraction(1, 5), "d": Fraction(7, 10), "n": n})
    red = scaling(fam)
    sf = integrate_ode(ode_system(red.ode), [1.0, 0.1, 0.0, 0.0], (0.5, 2.5), tol=1e-11)
    pts = [(zz * math.sqrt(T), T) for T in np.linspace(1, 2, 11) for zz in np.linspace(0.6, 2.4, 11)]
    assert verify_reduction(red, sf, pts).passed
    assert not verify_reduction(red, sf.scaled(1.01), pts).passed


def test_out_of_span_grid_is_a_domain_violation():
    red, sf = boussinesq_wave()
    with pytest.raises(DomainViolationError):
        verify_reduction(red, sf, [(20.0, 0.0)])


def test_surface_condition_for_constants_and_time_profiles():
    zero = lambda X, T, U: 0.0  # noqa: E731
    one = lambda X, T, U: 1.0  # noqa: E731
    assert verify_surface_condition(one, zero, lambda X, T: 2.0, GRID).max_residual == 0
    rep = verify_surface_condition(one, zero, lambda X, T: T**2, [(0.0, 1.5)])
    assert rep.max_residual == pytest.approx(3.0, rel=1e-9)


def test_travelling_wave_satisfies_its_surface_condition():
    lam = 1.7
    rep = verify_surface_condition(lambda X, T, U: lam, lambda X, T, U: 0.0,
                                   lambda X, T: math.exp(-((X - lam * T) ** 2)), GRID)
    assert rep.passed and rep.max_residual <= 1e-7


def test_invariant_surface_by_characteristics():
    # p = x/t, r = u/t from u(x, 1) = x^2 gives u = x^2 / t
    surf = InvariantSurface(lambda X, T, U: X / T, lambda X, T, U: U / T, lambda X: X * X, 1.0)
    assert surf(0.8, 2.0) == pytest.approx(0.32, abs=1e-9)
    pts = [(a, b) for a in (0.5, 1.0) for b in (1.5, 2.0)]
    rep = verify_surface_condition(surf.p, surf.r, surf, pts)
    assert rep.passed, rep.summary()


def test_elementary_time_profile_matches_closed_form():
    sf = solve_h(1.0, 0.0, (1, 3), 4.0, sign=-1, closed_form=False)
    assert max(abs(sf(s)[0] - 4 / s**2) for s in np.linspace(1, 3, 40)) <= 1e-7
