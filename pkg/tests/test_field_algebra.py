import math
import random

import numpy as np
import pytest
import sympy
from hypothesis import given, settings

from kr_steer.errors import DimensionMismatchError, PoleError
from kr_steer.field_algebra import (
    Expr,
    Polynomial,
    PolyVectorField,
    SmoothExprField,
    eval_field,
    lie_bracket,
    lie_derivative,
    lift,
    sec,
    tan,
)
from kr_steer.kr_forms import build_kr, chained_form, kappa3
from kr_steer.trailer_model import trailer_fields

from conftest import poly_fields, random_field, random_poly


def coord(i, n):
    return PolyVectorField.coordinate(i, n)


def test_bracket_of_a_field_with_itself_vanishes():
    k2 = chained_form(4).k2
    assert lie_bracket(k2, k2).is_zero()


def test_bracket_with_last_coordinate_field():
    k = chained_form(4)
    assert lie_bracket(coord(3, 4), k.k2) == coord(2, 4)


def test_second_order_bracket_in_engel_form():
    k = chained_form(4)
    assert lie_bracket(k.k2, lie_bracket(k.k1, k.k2)) == -coord(1, 4)


def test_bracket_matches_sympy_jacobians(rng):
    syms = sympy.symbols("x0:3")
    for _ in range(5):
        f, g = random_field(rng, 3), random_field(rng, 3)
        F = sympy.Matrix([_sym(c, syms) for c in f.components])
        G = sympy.Matrix([_sym(c, syms) for c in g.components])
        expected = G.jacobian(syms) * F - F.jacobian(syms) * G
        got = sympy.Matrix([_sym(c, syms) for c in lie_bracket(f, g).components])
        assert sympy.expand(expected - got) == sympy.zeros(3, 1)


def _sym(p, syms):
    return sum(sympy.Rational(c.numerator, c.denominator) * sympy.Mul(*[s**e for s, e in zip(syms, m)])
               for m, c in p.terms.items())


def test_dimension_and_type_checks():
    with pytest.raises(DimensionMismatchError):
        lie_bracket(coord(0, 3), coord(0, 4))
    with pytest.raises(TypeError):
        lie_bracket(coord(0, 3), coord(0, 3).to_exprs())


def test_lift_appends_zero_component():
    f = lift(coord(0, 3))
    assert f.dimension == 4 and f == coord(0, 4)
    k2 = lift(kappa3().k2)
    x3 = Polynomial.var(2, 4)
    assert k2 == PolyVectorField([Polynomial.const(1, 4), x3, Polynomial.zero(4), Polynomial.zero(4)])


def test_lift_commutes_with_bracket(rng):
    for _ in range(10):
        f, g = random_field(rng, 3), random_field(rng, 3)
        assert lie_bracket(lift(f), lift(g)) == lift(lie_bracket(f, g))


def test_lie_derivative_examples():
    x4 = Polynomial.var(3, 4)
    assert lie_derivative(coord(3, 4), x4) == Polynomial.const(1, 4)
    k2 = chained_form(4).k2
    assert lie_derivative(k2, Polynomial.var(2, 4)) == x4
    tau1, _ = trailer_fields(0)
    nu0 = lie_derivative(tau1, tan(Expr.var(2)))
    for th in (0.0, 0.4, -1.1):
        assert nu0([0, 0, th]) == pytest.approx(1 / math.cos(th) ** 2, rel=1e-14)


def test_lie_derivative_mixes_representations():
    e = Expr.var(0) * Expr.var(2)
    k2 = kappa3().k2
    got = lie_derivative(k2, e)
    assert got([1.0, 2.0, 3.0]) == pytest.approx(3.0)


def test_leibniz_rule(rng):
    f = random_field(rng, 4)
    h1, h2 = random_poly(rng, 4), random_poly(rng, 4)
    lhs = lie_derivative(f, h1 * h2)
    rhs = h1 * lie_derivative(f, h2) + h2 * lie_derivative(f, h1)
    pts = np.random.default_rng(1).uniform(-1, 1, (20, 4))
    for p in pts:
        assert abs(lhs.evaluate(list(p)) - rhs.evaluate(list(p))) < 1e-10
    # also on trig fields
    tau1, tau2 = trailer_fields(1)
    a, b = tan(Expr.var(2)), sec(Expr.var(3) - Expr.var(2))
    lhs = lie_derivative(tau2, a * b)
    rhs = a * lie_derivative(tau2, b) + b * lie_derivative(tau2, a)
    for p in np.random.default_rng(2).uniform(-1, 1, (20, 4)):
        assert abs(lhs(p) - rhs(p)) < 1e-10


def test_eval_field_examples():
    assert eval_field(chained_form(4).k2, (0, 0, 0, 0)) == [1.0, 0.0, 0.0, 0.0]
    _, tau2 = trailer_fields(0)
    assert np.allclose(eval_field(tau2, (0, 0, math.pi / 2)), [0, 1, 0], atol=1e-15)
    f = SmoothExprField([Expr.const(1), sec(Expr.var(2)), Expr.const(0)])
    with pytest.raises(PoleError) as info:
        eval_field(f, (0, 0, math.pi / 2))
    assert info.value.component == 1
    with pytest.raises(DimensionMismatchError):
        eval_field(f, (0, 0))


def test_expression_bracket_agrees_with_polynomial_bracket(rng):
    f, g = random_field(rng, 3, 2), random_field(rng, 3, 2)
    exact = lie_bracket(f, g)
    symbolic = lie_bracket(f.to_exprs(), g.to_exprs())
    for p in np.random.default_rng(4).uniform(-1, 1, (10, 3)):
        assert np.allclose(symbolic.evaluate(p), eval_field(exact, p), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(poly_fields(4), poly_fields(4), poly_fields(4))
def test_antisymmetry_bilinearity_jacobi(f, g, h):
    assert (lie_bracket(f, g) + lie_bracket(g, f)).is_zero()
    assert lie_bracket(f, g + h.scale(3)) == lie_bracket(f, g) + lie_bracket(f, h).scale(3)
    jac = lie_bracket(f, lie_bracket(g, h)) + lie_bracket(g, lie_bracket(h, f)) + lie_bracket(h, lie_bracket(f, g))
    assert jac.is_zero()


def test_jacobi_on_trig_fields():
    tau1, tau2 = trailer_fields(1)
    c = SmoothExprField.coordinate(0, 4)
    jac = (lie_bracket(tau1, lie_bracket(tau2, c)) + lie_bracket(tau2, lie_bracket(c, tau1))
           + lie_bracket(c, lie_bracket(tau1, tau2)))
    for p in np.random.default_rng(5).uniform(-1, 1, (10, 4)):
        assert np.allclose(jac.evaluate(p), 0, atol=1e-12)
