import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boussym.classify import (
    FFamily,
    ansatz_solve,
    ansatz_solve_detail,
    detect_family,
    generators_for,
    power_form,
    same_span,
    translations,
)
from boussym.determining import build_classical, residuals
from boussym.expr import Num, equiv, parse, render
from boussym.jet import VectorField


def test_classical_boussinesq_is_quadratic():
    fam = detect_family(parse("u^2/2 + u"))
    assert fam.tag == "quadratic"
    assert fam.params == {"d": Num(Fraction(1, 2)), "b": Num(1), "c": Num(0)}


def test_exp_family_parameters():
    fam = detect_family(parse("3*exp(2*u+1) + u + 5"))
    assert fam.tag == "exp"
    assert {k: fam.params[k] for k in "abcd"} == {"a": Num(2), "b": Num(1), "c": Num(5), "d": Num(3)}


@pytest.mark.parametrize("text", ["u + log(u^2+1)", "f(u)", "u^3 + u^2"])
def test_arbitrary(text):
    assert detect_family(parse(text)).tag == "arbitrary"


@pytest.mark.parametrize(
    "text, tag",
    [
        ("d*(a*u+b)^n + u + c", "power"),
        ("d*log(a*u+b) + u + c", "log"),
        ("d*exp(a*u+b) + u + c", "exp"),
        ("2*(3*u+1)^(5/2) + u", "power"),
        ("(u+1)^3 + 2*u", "power"),
    ],
)
def test_family_tags(text, tag):
    fam = detect_family(parse(text))
    assert fam.tag == tag
    assert equiv(fam.f_expr(), parse(text), trials=10, tol=1e-10)


def test_family_validation():
    with pytest.raises(ValueError):
        FFamily("power", {"a": 1, "d": 1, "n": 1})
    with pytest.raises(ValueError):
        FFamily("exp", {"a": 0, "d": 1})
    with pytest.raises(ValueError):
        FFamily("quadratic", {"d": 0})
    with pytest.raises(ValueError):
        detect_family(parse("x*u"))


rationals = st.fractions(min_value=Fraction(1, 5), max_value=Fraction(5), max_denominator=7)


@given(
    st.sampled_from(["power", "log", "exp"]),
    rationals,
    rationals,
    rationals,
    rationals,
    st.sampled_from([Fraction(2), Fraction(3), Fraction(-1), Fraction(5, 2), Fraction(-3, 2)]),
)
@settings(max_examples=25, deadline=None)
def test_detect_render_construct_round_trip(tag, a, b, c, d, n):
    params = {"a": a, "b": b, "c": c, "d": d, "k": 1}
    if tag == "power":
        params["n"] = n
    fam = FFamily(tag, params)
    again = detect_family(parse(render(fam.f_expr())))
    assert again.tag == tag
    for k, v in fam.params.items():
        assert again.params[k] == v


def test_generators_for_examples():
    assert generators_for(FFamily("arbitrary")) == translations()
    log = generators_for(FFamily("log", {"a": 2, "b": 1, "c": 0, "d": 1}))
    assert log[2] == VectorField.parse("x*dx + 2*t*dt + (2/2)*(2*u+1)*du").normalized()
    exp = generators_for(FFamily("exp", {"a": 2, "b": 1, "c": 0, "d": 1}))
    assert exp[2] == VectorField.parse("x*dx + 2*t*dt - (2/2)*du").normalized()


def test_generators_need_unit_linear_coefficient():
    fam = FFamily("power", {"a": 1, "b": 0, "d": 1, "n": 3, "k": 2})
    assert generators_for(fam) == translations()


def _draw(rng, tag):
    q = lambda: Fraction(rng.randint(1, 40), rng.randint(1, 9))  # noqa: E731
    params = {"a": q(), "b": q(), "c": q(), "d": q()}
    if tag == "power":
        params["n"] = rng.choice([Fraction(2), Fraction(3), Fraction(-1), Fraction(5, 3)])
    return FFamily(tag, params)


@pytest.mark.parametrize("tag", ["power", "log", "exp"])
def test_table_generators_pass_and_are_recovered(tag):
    rng = random.Random({"power": 1, "log": 2, "exp": 3}[tag])
    for _ in range(3):
        fam = _draw(rng, tag)
        gens = generators_for(fam)
        S = build_classical(fam.fspec())
        for V in gens:
            rep = residuals(S, V)
            assert rep.passed and rep.max_residual == 0
        assert same_span(ansatz_solve(fam.fspec()), gens)


def test_symbolic_f_gives_translations_only():
    result = ansatz_solve_detail(None)
    assert same_span(result.generators, translations())
    assert len(result.generators) == 2


def test_symbolic_power_family_with_conditions():
    result = ansatz_solve_detail(parse("d*(a*u+b)^n + u + c"))
    assert len(result.generators) == 3
    assert sorted(render(c) for c in result.conditions) == ["a", "n - 1"]


def test_generators_are_canonical():
    gens = ansatz_solve(parse("2*exp(3*u) + u"))
    scaling = [V for V in gens if V.p != Num(0)]
    assert scaling[-1].p == parse("x")


def test_same_span_detects_difference():
    a = [VectorField.parse("dx"), VectorField.parse("x*dx + 2*t*dt")]
    b = [VectorField.parse("dx"), VectorField.parse("x*dx + t*dt")]
    assert not same_span(a, b)
    assert same_span(a, [VectorField.parse("2*x*dx + 4*t*dt + 3*dx"), VectorField.parse("dx")])


def test_power_form_of_quadratic():
    fam = detect_family(parse("3*u^2 + 5*u + 7"))
    pf = power_form(fam)
    assert pf.tag == "power" and pf.params["n"] == Num(2)
    assert equiv(pf.f_expr(), fam.f_expr())
    assert power_form(pf) is pf
