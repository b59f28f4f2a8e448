import pytest

from boussym.classify import FFamily, generators_for
from boussym.determining import (
    Candidate,
    FSpec,
    NumericField,
    build_classical,
    build_nonclassical,
    residuals,
)
from boussym.errors import UnboundParameterError
from boussym.expr import Num, param, parse
from boussym.jet import VectorField

POWER = "d*(a*u+b)^n + u + c"


def test_equation_counts_are_recorded():
    C = build_classical()
    N = build_nonclassical()
    assert len(C) == C.to_dict()["count"] == 31
    assert len(N) == N.to_dict()["count"] == 14


@pytest.mark.parametrize("build", [build_classical, build_nonclassical])
def test_equations_are_free_of_jets_and_distinct(build):
    S = build()
    for e in S.equations:
        assert not [s for s in e.free_symbols() if s.kind == "jet" and s.order >= 1]
    assert len(set(S.equations)) == len(S.equations)
    assert len(S.basis) == len(S.equations)


@pytest.mark.parametrize("gen", ["dx", "dt"])
def test_translations_are_exact(gen):
    rep = residuals(build_classical(), VectorField.parse(gen))
    assert rep.passed and rep.max_residual == 0
    assert all(row["status"] == "exact" for row in rep.rows)


def test_power_scaling_generator_is_exact():
    S = build_classical(parse(POWER))
    V = VectorField.parse("x*dx + 2*t*dt + (2/(a*(1-n)))*(a*u+b)*du")
    rep = residuals(S, V)
    assert rep.passed and rep.max_residual == 0


def test_wrong_scaling_fails_for_quadratic_f():
    S = build_classical(parse("d*u^2 + b*u + c"))
    rep = residuals(S, VectorField.parse("x*dx + t*dt"))
    assert not rep.passed
    assert rep.max_residual > 1e-3


def test_zero_field_passes():
    rep = residuals(build_classical(parse(POWER)), VectorField(Num(0), Num(0), Num(0)))
    assert rep.passed


def test_nonclassical_translation_is_exact():
    rep = residuals(build_nonclassical(), (1, 0))
    assert rep.passed and rep.max_residual == 0


@pytest.mark.parametrize(
    "tag, params",
    [
        ("power", {"a": param("a"), "b": param("b"), "c": param("c"), "d": param("d"), "n": param("n")}),
        ("log", {"a": param("a"), "b": param("b"), "c": param("c"), "d": param("d")}),
        ("exp", {"a": param("a"), "b": param("b"), "c": param("c"), "d": param("d")}),
    ],
)
def test_classical_symmetries_are_nonclassical(tag, params):
    fam = FFamily(tag, {**params, "k": Num(1)})
    S = build_nonclassical(fam.fspec())
    V = generators_for(fam)[-1]
    rep = residuals(S, V, boxes={"t": (0.5, 2.0)})
    assert rep.passed, rep.summary()


def test_candidate_with_unknown_parameter():
    with pytest.raises(UnboundParameterError):
        residuals(build_classical(parse("u^2")), VectorField.parse("zeta*dx"))


def test_classical_needs_q():
    with pytest.raises(ValueError):
        residuals(build_classical(), (1, 0))


def test_q_zero_branch_is_rejected():
    with pytest.raises(ValueError, match="q = 0"):
        residuals(build_nonclassical(), VectorField.parse("dx"))


class Constant(NumericField):
    def __init__(self, c):
        super().__init__(lambda X, T, U: c)

    def derivative(self, index):
        return self.fun if not any(index) else (lambda X, T, U: 0.0)


def test_numeric_translation_candidate():
    S = build_classical(parse("u^2/2 + u"))
    rep = residuals(S, Candidate(Constant(1.0), Constant(0.0), Constant(0.0)))
    assert rep.passed and rep.settings["mode"] == "numeric"
    assert all(row["points"] == 100 for row in rep.rows)


def test_numeric_wrong_candidate_fails():
    S = build_nonclassical(parse("u^2/2 + u"))
    rep = residuals(S, Candidate(NumericField(lambda X, T, U: X, {(1, 0, 0): lambda X, T, U: 1.0}), Constant(0.0)))
    assert not rep.passed


def test_fspec_rejects_other_variables():
    with pytest.raises(ValueError):
        FSpec.concrete(parse("x*u"))


def test_system_serializes():
    d = build_nonclassical(parse("d*u^2 + b*u + c")).to_dict()
    assert d["method"] == "nonclassical"
    assert d["metadata"]["surface_condition"] == "p*u_x + u_t - r = 0"
    assert all(isinstance(e, str) for e in d["equations"])
