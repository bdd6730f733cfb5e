import random
from fractions import Fraction

import pytest
from hypothesis import strategies as st

from kr_steer.field_algebra import Polynomial, PolyVectorField

small_fracs = st.fractions(min_value=-5, max_value=5, max_denominator=6)


@st.composite
def polynomials(draw, num_vars=3, max_degree=3, max_terms=4):
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        mono = tuple(draw(st.integers(0, max_degree)) for _ in range(num_vars))
        if sum(mono) <= max_degree:
            terms[mono] = draw(small_fracs)
    return Polynomial(terms, num_vars)


@st.composite
def poly_fields(draw, dim=3, max_degree=3):
    return PolyVectorField([draw(polynomials(dim, max_degree, 3)) for _ in range(dim)])


def random_poly(rng: random.Random, num_vars: int, max_degree: int = 3, n_terms: int = 4) -> Polynomial:
    terms = {}
    for _ in range(n_terms):
        mono = [0] * num_vars
        for _ in range(rng.randint(0, max_degree)):
            mono[rng.randrange(num_vars)] += 1
        terms[tuple(mono)] = Fraction(rng.randint(-9, 9), rng.randint(1, 4))
    return Polynomial(terms, num_vars)


def random_field(rng: random.Random, dim: int, max_degree: int = 3) -> PolyVectorField:
    return PolyVectorField([random_poly(rng, dim, max_degree) for _ in range(dim)])


@pytest.fixture
def rng():
    return random.Random(20240611)


# acceptance report: one line per criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, passed: bool, detail: str):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
