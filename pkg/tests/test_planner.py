import json
import math
import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from kr_steer.errors import AbnormalControlError, DomainError, SizeBudgetError, UnreachableError, WindowMismatchError
from kr_steer.field_algebra import eval_field
from kr_steer.kr_forms import build_kr
from kr_steer.planner import (
    ControlLaw,
    Surd,
    SteeringPlan,
    endpoint_map,
    origin_quadratic,
    plan,
    reachability_vertex,
    reachable,
    solve_two_trailer,
    two_trailer_endpoint,
    two_trailer_quadratic,
)
from kr_steer.trailer_model import Configuration

PI = math.pi


def test_endpoint_coefficients_of_first_and_fifth_coordinates():
    em = two_trailer_endpoint()
    c = em.coefficient
    assert [c(1, {"a1": 1, k: 1}) for k in ("a2", "a3", "a4", "a5")] == [F(1, 2), F(1, 6), F(1, 12), F(1, 20)]
    assert [c(3, {"a1": 2, k: 1}) for k in ("a2", "a3", "a4", "a5")] == [F(1, 3), F(1, 8), F(1, 15), F(1, 24)]
    assert c(4, {"a1": 1}) == 1
    assert [c(5, {k: 1}) for k in ("a2", "a3", "a4", "a5")] == [1, F(1, 2), F(1, 3), F(1, 4)]


def test_endpoint_coefficients_of_second_coordinate():
    c = two_trailer_endpoint().coefficient
    squares = [c(2, {"a1": 3, k: 2}) for k in ("a2", "a3", "a4", "a5")]
    assert squares == [F(1, 15), F(1, 112), F(1, 405), F(1, 1056)]
    cross = {pair: c(2, {"a1": 3, pair[0]: 1, pair[1]: 1}) for pair in
             [("a2", "a3"), ("a2", "a4"), ("a2", "a5"), ("a3", "a4"), ("a3", "a5"), ("a4", "a5")]}
    assert cross == {
        ("a2", "a3"): F(7, 144), ("a2", "a4"): F(8, 315), ("a2", "a5"): F(5, 320),
        ("a3", "a4"): F(3, 320), ("a3", "a5"): F(5, 864), ("a4", "a5"): F(11, 3600),
    }


def test_endpoint_has_no_other_terms_from_origin():
    em = two_trailer_endpoint().specialize({f"p{i}": 0 for i in range(1, 6)})
    assert [len(p.terms) for p in em.polys] == [4, 10, 4, 1, 4]


def test_endpoint_matches_ode_integration():
    rng = np.random.default_rng(7)
    for word in ["", "R(0)", "S", "R(0).S", "S.R(1)"]:
        pair = build_kr(word)
        em = endpoint_map(word)
        n = pair.dimension
        for _ in range(3):
            a = rng.uniform(-1, 1, n - 1)
            b0 = rng.uniform(-1, 1)
            x0 = rng.uniform(-1, 1, n)

            def rhs(t, x):
                u1 = sum(c * t**k for k, c in enumerate(a))
                return u1 * np.array(eval_field(pair.k1, x)) + b0 * np.array(eval_field(pair.k2, x))

            sol = solve_ivp(rhs, (0, 1), x0, rtol=1e-12, atol=1e-13)
            assert np.allclose(em.evaluate(list(a), b0, list(x0)), sol.y[:, -1], atol=1e-9)


def test_endpoint_budget_and_horizon():
    with pytest.raises(SizeBudgetError):
        endpoint_map("S.S.S.S.S")
    em = endpoint_map("", horizon=2)
    # x3(T) = a0 T + a1 T^2/2 from zero
    assert em.evaluate([1, 1], 0) == [0, 0, 4]
    with pytest.raises(ValueError):
        endpoint_map("", horizon=0)


def test_zero_controls_stay_put():
    em = two_trailer_endpoint()
    p = [F(1), F(-2), F(3, 7), F(5), F(1, 9)]
    assert em.evaluate([0, 0, 0, 0], 0, p) == p


def random_q(rng):
    q = [F(rng.randint(-40, 40), rng.randint(1, 9)) for _ in range(5)]
    while q[3] == 0:
        q[3] = F(rng.randint(-40, 40), rng.randint(1, 9))
    return q


def test_solutions_hit_target_exactly():
    rng = random.Random(5)
    em = two_trailer_endpoint()
    hits = 0
    while hits < 500:
        q = random_q(rng)
        if not reachable(q):
            continue
        for sol in solve_two_trailer(q):
            assert em.evaluate(list(sol.law.a), sol.law.b0) == q
        hits += 1


def test_general_initial_state_exact():
    rng = random.Random(9)
    em = two_trailer_endpoint()
    hits = 0
    while hits < 50:
        p, q = random_q(rng), random_q(rng)
        if p[3] == q[3] or not reachable(q, p):
            continue
        for sol in solve_two_trailer(q, p):
            assert em.evaluate(list(sol.law.a), sol.law.b0, p) == q
        hits += 1


def test_generic_elimination_agrees_with_closed_form():
    rng = random.Random(11)
    for _ in range(100):
        q = random_q(rng)
        a, b = origin_quadratic(q), two_trailer_quadratic(q)
        # same equation up to the common leading factor
        assert (a.A, a.B, a.C) == (b.A, b.B, b.C)
        assert a.affine == b.affine


def test_parabola_matches_discriminant():
    rng = random.Random(13)
    for _ in range(1000):
        q = random_q(rng)
        assert reachable(q) == (origin_quadratic(q).discriminant >= 0)


def test_boundary_gives_double_root():
    q = [F(1), F(0), F(2), F(3), F(-1)]
    q[1] = reachability_vertex(q)
    assert origin_quadratic(q).discriminant == 0
    sols = solve_two_trailer(q)
    assert len(sols) == 1
    assert two_trailer_endpoint().evaluate(list(sols[0].law.a), sols[0].law.b0) == q


def test_reachability_examples():
    assert reachable([0, 1, 0, 1, 0])
    assert not reachable([0, -1, 0, 1, 0])
    assert reachable([0, -1, 0, -1, 0])
    with pytest.raises(UnreachableError):
        solve_two_trailer([0, -1, 0, 1, 0])


def test_abnormal_target():
    with pytest.raises(AbnormalControlError):
        solve_two_trailer([1, 2, 3, 0, 4])
    with pytest.raises(AbnormalControlError):
        two_trailer_quadratic([1, 2, 3, 4, 5], [0, 0, 0, 4, 0])


def test_root_order_and_surds():
    sols = solve_two_trailer([0, 1, 0, 1, 0])
    assert len(sols) == 2
    assert abs(float(sols[0].a2)) <= abs(float(sols[1].a2))
    assert isinstance(sols[0].a2, Surd) and sols[0].a2.d == sols[0].discriminant


@settings(max_examples=60, deadline=None)
@given(st.fractions(-5, 5, max_denominator=7), st.fractions(-5, 5, max_denominator=7),
       st.fractions(0, 9, max_denominator=7), st.integers(2, 50))
def test_surd_arithmetic_matches_floats(r, s, d, k):
    x = Surd(r, s, d)
    y = Surd(s, r, d)
    assert float(x * y) == pytest.approx(float(x) * float(y), rel=1e-9, abs=1e-9)
    assert float(x + y - 3) == pytest.approx(float(x) + float(y) - 3, abs=1e-9)
    assert x - x == 0
    assert Surd.from_json(x.to_json()) == x


def test_control_law():
    law = ControlLaw((F(1), F(2), F(3)), F(-1))
    assert law(0.5) == (1 + 1 + 0.75, -1.0)
    assert ControlLaw.from_json(law.to_json(exact=True)) == law
    assert ControlLaw.from_json(json.loads(json.dumps(law.to_json()))) == law
    with pytest.raises(ValueError):
        ControlLaw((1,), 1, horizon=0)


# trailer-level plans ----------------------------------------------------------


ZT = Configuration(0, 1, (0.0, PI / 4, 3 * PI / 4))


def test_plan_for_first_figure():
    p = plan(Configuration(0, 0, (0.0, 0.0, PI / 4)), ZT)
    assert p.x0 == pytest.approx((0, 0, 0, 0, 1))
    assert p.window_parity == 0
    assert len(p.a2_roots) == 2
    other = plan(p.zeta0, ZT, root_choice="max_abs")
    assert abs(float(other.law.a[0])) >= abs(float(p.law.a[0]))


def test_plan_json_round_trip():
    p = plan(Configuration(0, 0, (0.0, -PI / 4, 0.0)), ZT)
    back = SteeringPlan.from_json(p.dumps())
    assert back.to_json() == p.to_json()
    with pytest.raises(ValueError):
        SteeringPlan.from_json({"zeta0": [0] * 5})


def test_plan_errors():
    with pytest.raises(DomainError):
        plan(Configuration(0, 0, (PI / 2, 0.0, 0.0)), ZT)
    with pytest.raises(WindowMismatchError):
        plan(Configuration(0, 0, (0.0, 0.0, -PI / 4)), ZT)
    with pytest.raises(ValueError):
        plan(Configuration(0, 0, (0.0, 0.0, PI / 4)), ZT, root_choice="closest")
    with pytest.raises(ValueError):
        plan(Configuration(0, 0, (0.0, 0.0)), ZT)
