import itertools
from fractions import Fraction

import numpy as np
import pytest

from kr_steer.errors import AmbiguousRankError, DimensionMismatchError
from kr_steer.field_algebra import Polynomial, PolyVectorField, eval_field
from kr_steer.kr_forms import (
    KRWord,
    Regular,
    Singular,
    build_kr,
    chained_form,
    derived_flag_dims,
    kappa3,
    numeric_rank,
    prolong,
)
from kr_steer.trailer_model import Configuration, trailer_fields


def x(i, n):
    return Polynomial.var(i - 1, n)


def d(i, n):
    return PolyVectorField.coordinate(i - 1, n)


def test_kappa3():
    k = kappa3()
    assert k.k1 == d(3, 3)
    assert eval_field(k.k2, (0, 0, 0)) == [1.0, 0.0, 0.0]
    assert len(k.word) == 0


def test_regular_prolongation_gives_engel():
    k = prolong(kappa3(), Regular(0))
    assert k.k2 == d(3, 4).scale(x(4, 4)) + d(2, 4).scale(x(3, 4)) + d(1, 4)


def test_singular_prolongation():
    k = prolong(kappa3(), Singular())
    expected = d(3, 4) + (d(2, 4).scale(x(3, 4)) + d(1, 4)).scale(x(4, 4))
    assert k.k2 == expected


def test_regular_constant_shows_at_origin():
    k = prolong(kappa3(), Regular(5))
    assert eval_field(k.k2, (0, 0, 0, 0)) == [1.0, 0.0, 5.0, 0.0]


def test_build_kr_folds_prolongations():
    assert build_kr([]).k2 == kappa3().k2
    assert build_kr([Regular(0), Regular(0)]).k2 == chained_form(5).k2
    s = prolong(kappa3(), Singular())
    assert build_kr([Singular(), Regular(0)]).k2 == s.k1.lift().scale(x(5, 5)) + s.k2.lift()
    assert build_kr("S.R(0)").word == KRWord((Singular(), Regular(0)))


def test_chained_form_components():
    assert chained_form(3).k2 == kappa3().k2
    comps = chained_form(6).k2.components
    assert comps == (Polynomial.const(1, 6), x(3, 6), x(4, 6), x(5, 6), x(6, 6), Polynomial.zero(6))
    with pytest.raises(ValueError):
        chained_form(2)


def test_word_parsing_and_printing():
    w = KRWord.parse("R(0).S.R(1/2)")
    assert w.steps == (Regular(0), Singular(), Regular(Fraction(1, 2)))
    assert str(w) == "R(0).S.R(1/2)"
    assert w.dimension == 6
    assert w.pattern() == (False, True, False)
    assert KRWord.parse("") == KRWord(())
    with pytest.raises(ValueError):
        KRWord.parse("R(x)")
    with pytest.raises(TypeError):
        KRWord(("S",))


def _words(max_len, tags):
    for n in range(max_len + 1):
        yield from itertools.product(tags, repeat=n)


@pytest.mark.parametrize("word", list(_words(4, [Regular(0), Regular(1), Regular(-2), Singular()]))[:: 7], ids=lambda w: str(KRWord(w)) or "empty")
def test_first_field_is_last_coordinate(word):
    pair = build_kr(word)
    assert pair.k1 == d(pair.dimension, pair.dimension)


def test_goursat_flag_on_sign_patterns():
    rng = np.random.default_rng(11)
    consts = [0, 1, -2]
    for n in range(5):
        for pattern in itertools.product([False, True], repeat=n):
            word = [Singular() if s else Regular(consts[rng.integers(3)]) for s in pattern]
            pair = build_kr(word)
            for p in rng.uniform(-1, 1, (20, n + 3)):
                assert derived_flag_dims(pair, p) == list(range(2, n + 4))


def test_flag_examples():
    assert derived_flag_dims(kappa3(), [0.3, -0.2, 0.9]) == [2, 3]
    assert derived_flag_dims(chained_form(5), [0.1, 0.7, -0.4, 0.2, 0.5]) == [2, 3, 4, 5]
    assert derived_flag_dims(build_kr("S.S"), [0] * 5) == [2, 3, 4, 5]
    p = Configuration(0, 0, (0.0, 0.0, np.pi / 2))
    assert derived_flag_dims(trailer_fields(2), p.as_array()) == [2, 3, 4, 5]


def test_flag_depth_and_dimension_checks():
    assert derived_flag_dims(kappa3(), [0, 0, 0], depth=0) == [2]
    with pytest.raises(DimensionMismatchError):
        derived_flag_dims(kappa3(), [0, 0])
    with pytest.raises(ValueError):
        derived_flag_dims(kappa3(), [0, 0, 0], depth=-1)


def test_degenerate_distribution_detected():
    # two commuting coordinate fields never grow
    f = [d(1, 3), d(2, 3)]
    assert derived_flag_dims(f, [0, 0, 0]) == [2, 2]


def test_numeric_rank_and_ambiguity():
    assert numeric_rank(np.eye(3)) == 3
    assert numeric_rank(np.diag([1.0, 1e-12])) == 1
    with pytest.raises(AmbiguousRankError):
        numeric_rank(np.diag([1.0, 1e-8]))
    assert numeric_rank(np.diag([1.0, 1e-8]), strict=False) == 1
    assert numeric_rank(np.zeros((2, 2))) == 0


def test_flag_at_consecutive_singular_joints():
    # some brackets vanish here up to roundoff and must not count as directions
    for n in (3, 4):
        th = [0.4]
        for s in [1, -1, 1, 1][:n]:
            th.append(th[-1] + s * np.pi / 2)
        p = Configuration(0.3, -0.2, tuple(th))
        assert derived_flag_dims(trailer_fields(n), p.as_array()) == list(range(2, n + 4))
    p = [1.9808176417416594, 0.4882149485935616, -1.090109657783595, -0.8385876625814346,
         0.732208664213462, -0.8385876625814346]
    assert derived_flag_dims(trailer_fields(3), p) == [2, 3, 4, 5, 6]
