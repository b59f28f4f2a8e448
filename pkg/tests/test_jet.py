import random

import pytest

from boussym.errors import JetOrderError
from boussym.expr import ZERO, equiv, is_zero, normalize, parse, substitute
from boussym.jet import VectorField, apply_prolonged, prolong, total_derivative

PDE = parse("u_tt - u_xx + d2x(f(u) + u_xx)")


@pytest.mark.parametrize(
    "text, direction, expected",
    [("u^2", "x", "2*u*u_x"), ("u_x", "x", "u_xx"), ("f(u)", "t", "f'(u)*u_t"), ("x*t", "t", "x")],
)
def test_total_derivative_examples(text, direction, expected):
    assert is_zero(total_derivative(parse(text), direction) - parse(expected))


def test_total_derivatives_commute():
    for text in ("u*u_x^2 + x*t*u_t", "f(u)*u_xt", "exp(u)*u_xx*t"):
        e = parse(text)
        xt = total_derivative(total_derivative(e, "x"), "t")
        tx = total_derivative(total_derivative(e, "t"), "x")
        assert is_zero(xt - tx)


def test_jet_order_overflow():
    with pytest.raises(JetOrderError):
        total_derivative(parse("u_xxxxxx"), "x")


@pytest.mark.parametrize("gen", ["dx", "dt"])
def test_translations_prolong_to_zero(gen):
    PV = prolong(VectorField.parse(gen), 4)
    for ij in PV.indices():
        if sum(ij) >= 1:
            assert is_zero(PV.coefficient(*ij))
    assert is_zero(apply_prolonged(PV, PDE))


def test_scaling_first_order_coefficient():
    PV = prolong(VectorField.parse("x*dx + 2*t*dt + u*du"), 1)
    assert is_zero(PV.coefficient(1, 0))
    assert is_zero(PV.coefficient(0, 1) + parse("u_t"))


def test_constant_is_annihilated():
    PV = prolong(VectorField.parse("x*u*dx + t^2*dt + exp(u)*du"), 4)
    assert apply_prolonged(PV, parse("7")) == ZERO


def _random_field(rng):
    pool = ["x", "t", "u", "x*u", "t*u", "u^2", "x*t", "1", "exp(u)", "x^2"]

    def coef():
        return " + ".join(f"{rng.randint(-3, 3)}*{rng.choice(pool)}" for _ in range(2))

    return VectorField(parse(coef()), parse(coef()), parse(coef()))


def test_recursive_and_characteristic_prolongations_agree():
    rng = random.Random(11)
    for _ in range(20):
        V = _random_field(rng)
        a = prolong(V, 4, "recursive")
        b = prolong(V, 4, "characteristic")
        for ij in b.indices():
            assert equiv(a.coefficient(*ij), b.coefficient(*ij), trials=3, tol=1e-9), ij


def test_prolongation_is_linear():
    rng = random.Random(5)
    V1, V2 = _random_field(rng), _random_field(rng)
    a, b, s = prolong(V1, 3), prolong(V2, 3), prolong(V1 + V2, 3)
    for ij in s.indices():
        assert is_zero(s.coefficient(*ij) - a.coefficient(*ij) - b.coefficient(*ij))


def test_order_out_of_range():
    with pytest.raises(ValueError):
        prolong(VectorField.parse("dx"), 5)


def test_scaling_symmetry_on_the_solution_manifold():
    f = parse("d*(a*u+b)^n + u + c")
    F = normalize(substitute(PDE, {"f": _lam(f)}))
    V = VectorField.parse("x*dx + 2*t*dt + (2/(a*(1-n)))*(a*u+b)*du")
    image = apply_prolonged(prolong(V, 4), F)
    on_manifold = substitute(image, {"u_tt": normalize(parse("u_tt") - F)})
    assert equiv(on_manifold, ZERO, trials=20, tol=1e-9)


def _lam(f):
    from boussym.expr import Lambda, u

    return Lambda((u,), f)


def test_vector_field_rejects_jets_and_nonlinear_markers():
    with pytest.raises(ValueError):
        VectorField(parse("u_x"), parse("0"), parse("0"))
    with pytest.raises(ValueError):
        VectorField.parse("dx*dt")
