"""Steering in Kumpera-Ruiz coordinates with polynomial controls.

Under ``u1 = a0 + a1 t + ... + a_{n-2} t^{n-2}`` and ``u2 = b0`` the KR
system is triangular (``x_n`` is driven by ``u1`` and every other component
only by higher-indexed ones), so it integrates by successive quadratures into
an exact polynomial endpoint map.  For two trailers the endpoint equations are
linear in all control coefficients but one, which satisfies a quadratic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Sequence

from .conversion import FeedbackMaps, in_domain, two_trailer_chain, two_trailer_map, window_of
from .errors import (
    AbnormalControlError,
    DomainError,
    SizeBudgetError,
    UnreachableError,
    WindowMismatchError,
)
from .field_algebra import Polynomial
from .kr_forms import KRPair, KRWord, build_kr
from .trailer_model import Configuration

MAX_WORD_LENGTH = 4
MAX_TERMS = 500_000
ROOT_CHOICES = ("min_abs", "max_abs")
TWO_TRAILER_WORD = "R(0).S"


# exact numbers of the form r + s*sqrt(d) --------------------------------------


@dataclass(frozen=True)
class Surd:
    """``r + s*sqrt(d)`` with rational ``r, s`` and a fixed non-square ``d > 0``."""

    r: Fraction
    s: Fraction = Fraction(0)
    d: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "r", Fraction(self.r))
        object.__setattr__(self, "s", Fraction(self.s))
        object.__setattr__(self, "d", Fraction(self.d))

    @property
    def is_rational(self) -> bool:
        return self.s == 0

    def _lift(self, other) -> "Surd":
        if isinstance(other, Surd):
            if other.s and self.s and other.d != self.d:
                raise ValueError("cannot mix different radicands")
            return other
        if isinstance(other, (int, Fraction)):
            return Surd(other, 0, self.d)
        return NotImplemented

    def _radicand(self, other: "Surd") -> Fraction:
        return self.d if self.s else other.d

    def __add__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return Surd(self.r + o.r, self.s + o.s, self._radicand(o))

    __radd__ = __add__

    def __neg__(self):
        return Surd(-self.r, -self.s, self.d)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        d = self._radicand(o)
        return Surd(self.r * o.r + self.s * o.s * d, self.r * o.s + self.s * o.r, d)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out: Surd = Surd(1, 0, self.d)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.s == 0 and self.r == other
        if isinstance(other, Surd):
            return self.r == other.r and self.s == other.s and (self.s == 0 or self.d == other.d)
        return NotImplemented

    def __hash__(self):
        return hash((self.r, self.s, self.d if self.s else 0))

    def __float__(self):
        return float(self.r) + float(self.s) * math.sqrt(self.d)

    def __str__(self):
        if not self.s:
            return str(self.r)
        sign = "-" if self.s < 0 else "+"
        rad = f"{abs(self.s)}*sqrt({self.d})"
        return f"{sign}{rad}" if self.r == 0 else f"{self.r} {sign} {rad}"

    def to_json(self) -> dict:
        return {"r": str(self.r), "s": str(self.s), "d": str(self.d)}

    @classmethod
    def from_json(cls, data) -> "Surd":
        return cls(Fraction(data["r"]), Fraction(data["s"]), Fraction(data["d"]))


def _exact_sqrt(q: Fraction):
    """Rational square root if ``q`` is a perfect square, else ``None``."""
    if q < 0:
        return None
    num, den = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if num * num == q.numerator and den * den == q.denominator:
        return Fraction(num, den)
    return None


def _exact(value) -> Fraction:
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise DomainError(f"non-finite value {value}")
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot use {type(value).__name__} as an exact number")


def _generic_eval(poly: Polynomial, point: Sequence):
    """Evaluate with any ring elements (Fraction, Surd, float)."""
    total = 0
    for mono, c in poly.terms.items():
        term = c
        for v, e in zip(point, mono):
            if e:
                term = term * v ** e if e > 1 else term * v
        total = term + total
    return total


# controls and endpoint maps ----------------------------------------------------


@dataclass(frozen=True)
class ControlLaw:
    """``u1(t) = sum a[k] t^k`` and ``u2(t) = b0`` on ``[0, horizon]``.

    Coefficients may be Fractions or :class:`Surd` values; evaluation is float.
    """

    a: tuple
    b0: object
    horizon: object = Fraction(1)
    _floats: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(self.a))
        if float(self.horizon) <= 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "_floats", (tuple(float(c) for c in self.a), float(self.b0)))

    @property
    def degree(self) -> int:
        return len(self.a) - 1

    def __call__(self, t: float) -> tuple:
        """``(u1(t), u2(t))`` as floats."""
        coeffs, b0 = self._floats
        u1 = 0.0
        for c in reversed(coeffs):
            u1 = u1 * t + c
        return u1, b0

    def to_json(self, exact: bool = False) -> dict:
        """Float coefficients; ``exact`` adds rational/surd strings for exact round trips."""
        out = {
            "u1": [float(c) for c in self.a],
            "u2": float(self.b0),
            "horizon": float(self.horizon),
        }
        if exact:
            out["exact"] = {"u1": [_exact_json(c) for c in self.a], "u2": _exact_json(self.b0)}
        return out

    @classmethod
    def from_json(cls, data) -> "ControlLaw":
        ex = data.get("exact")
        if ex:
            return cls(tuple(_exact_from_json(c) for c in ex["u1"]), _exact_from_json(ex["u2"]),
                       _exact(data.get("horizon", 1)))
        return cls(tuple(_exact(c) for c in data["u1"]), _exact(data["u2"]), _exact(data.get("horizon", 1)))


def _exact_json(v):
    return v.to_json() if isinstance(v, Surd) else str(Fraction(v))


def _exact_from_json(v):
    return Surd.from_json(v) if isinstance(v, dict) else Fraction(v)


@dataclass(frozen=True)
class EndpointMap:
    """``x_i(T) = P_i(controls, x0)`` with exact rational coefficients.

    ``names`` labels the ring variables: the ``u1`` coefficients (constant
    first), the ``u2`` constant, then the initial state.
    """

    polys: tuple
    names: tuple
    dimension: int
    horizon: Fraction = Fraction(1)

    @property
    def num_controls(self) -> int:
        return self.dimension

    def index(self, name: str) -> int:
        return self.names.index(name)

    def renamed(self, names: Sequence[str]) -> "EndpointMap":
        if len(names) != len(self.names):
            raise ValueError(f"need {len(self.names)} names")
        return EndpointMap(self.polys, tuple(names), self.dimension, self.horizon)

    def coefficient(self, i: int, monomial: dict) -> Fraction:
        """Coefficient of ``prod name**power`` in ``P_i`` (``i`` is 1-based)."""
        mono = [0] * len(self.names)
        for name, e in monomial.items():
            mono[self.index(name)] = e
        return self.polys[i - 1].coefficient(tuple(mono))

    def evaluate(self, a: Sequence, b0, x0: Sequence | None = None) -> list:
        """Endpoint for the given controls; exact when inputs are exact."""
        n = self.dimension
        if len(a) != n - 1:
            raise ValueError(f"need {n - 1} u1 coefficients, got {len(a)}")
        x0 = [0] * n if x0 is None else list(x0)
        if len(x0) != n:
            raise ValueError(f"initial state needs {n} entries")
        point = list(a) + [b0] + x0
        return [_generic_eval(p, point) for p in self.polys]

    def specialize(self, values: dict) -> "EndpointMap":
        """Fix some named variables to exact constants."""
        assignment = {self.index(k): _exact(v) for k, v in values.items()}
        return EndpointMap(tuple(p.partial_substitute(assignment) for p in self.polys),
                           self.names, self.dimension, self.horizon)


def _check_triangular(pair: KRPair):
    n = pair.dimension
    k1, k2 = pair.k1, pair.k2
    expected = [Polynomial.const(int(i == n - 1), n) for i in range(n)]
    if list(k1.components) != expected:
        raise ValueError("first field must be d/dx_n")
    for i, comp in enumerate(k2.components):
        if any(v <= i for v in comp.variables()):
            raise ValueError(f"component {i + 1} of the second field is not triangular")


def endpoint_map(system, horizon=1, max_terms: int = MAX_TERMS) -> EndpointMap:
    """Integrate ``x' = k1 u1 + k2 u2`` under polynomial controls by quadrature.

    ``system`` is a KR word (object or string) or a triangular :class:`KRPair`.
    """
    if isinstance(system, KRPair):
        pair = system
    else:
        word = KRWord.parse(system) if isinstance(system, str) else system
        if len(word) > MAX_WORD_LENGTH:
            raise SizeBudgetError(f"words longer than {MAX_WORD_LENGTH} exceed the quadrature budget")
        pair = build_kr(word)
    _check_triangular(pair)
    horizon = _exact(horizon)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    n = pair.dimension
    names = tuple(f"a{k}" for k in range(n - 1)) + ("b0",) + tuple(f"x0_{i + 1}" for i in range(n))
    N = len(names) + 1  # time is the last ring variable
    t = N - 1
    var = [Polynomial.var(k, N) for k in range(N)]
    b0 = var[n - 1]
    x0 = var[n:2 * n]
    u1 = Polynomial.zero(N)
    for k in range(n - 1):
        u1 = u1 + var[k] * var[t] ** k
    traj = [None] * n
    traj[n - 1] = x0[n - 1] + u1.antiderivative(t)
    zero = Polynomial.zero(N)
    for i in range(n - 2, -1, -1):
        comp = pair.k2.components[i]
        values = [traj[j] if j > i else zero for j in range(n)]
        rate = comp.substitute(values) * b0
        traj[i] = x0[i] + rate.antiderivative(t)
        if len(traj[i].terms) > max_terms:
            raise SizeBudgetError(f"endpoint polynomial {i + 1} exceeds {max_terms} terms")
    drop = list(range(N - 1)) + [0]
    polys = tuple(p.partial_substitute({t: horizon}).permute(drop, N - 1) for p in traj)
    return EndpointMap(polys, names, n, horizon)


TWO_TRAILER_NAMES = ("a2", "a3", "a4", "a5", "a1", "p1", "p2", "p3", "p4", "p5")


@lru_cache(maxsize=None)
def two_trailer_endpoint() -> EndpointMap:
    """Endpoint map of the two-trailer KR system with ``u1 = a2 + a3 t + a4 t^2 + a5 t^3, u2 = a1``."""
    return endpoint_map(TWO_TRAILER_WORD).renamed(TWO_TRAILER_NAMES)


# the two-trailer solver ---------------------------------------------------------


@dataclass(frozen=True)
class Quadratic:
    """``A a2^2 + B a2 + C = 0`` with ``a3, a4, a5`` affine in ``a2``."""

    A: Fraction
    B: Fraction
    C: Fraction
    affine: tuple  # ((c0, c1) for a3, a4, a5): a_k = c0 + c1 a2
    a1: Fraction

    @property
    def discriminant(self) -> Fraction:
        return self.B * self.B - 4 * self.A * self.C


def _solve_linear(matrix, rhs):
    """Exact Gaussian elimination; ``rhs`` entries are lists (several right-hand sides)."""
    n = len(matrix)
    m = [list(row) + list(r) for row, r in zip(matrix, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col]), None)
        if piv is None:
            raise AbnormalControlError("endpoint equations are degenerate for this u2")
        m[col], m[piv] = m[piv], m[col]
        inv = 1 / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for r in range(n):
            if r != col and m[r][col]:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return [row[n:] for row in m]


def two_trailer_quadratic(q: Sequence, p: Sequence | None = None) -> Quadratic:
    """Eliminate ``a3, a4, a5`` from the endpoint equations and return the quadratic in ``a2``.

    Works for any initial KR state ``p`` (origin by default); floats are
    converted to their exact binary values so the algebra stays exact.
    """
    q = [_exact(v) for v in q]
    p = [Fraction(0)] * 5 if p is None else [_exact(v) for v in p]
    if len(q) != 5 or len(p) != 5:
        raise ValueError("two-trailer states have five coordinates")
    a1 = q[3] - p[3]
    if a1 == 0:
        raise AbnormalControlError("q4 equals p4: u2 would vanish (abnormal control)")
    em = two_trailer_endpoint().specialize({"a1": a1, **{f"p{i + 1}": p[i] for i in range(5)}})
    polys = em.polys
    lin = {name: em.index(name) for name in ("a2", "a3", "a4", "a5")}

    def linear_part(poly):
        if poly.degree() > 1:
            raise AssertionError("expected a linear endpoint equation")
        row = {k: poly.coefficient(_unit(idx, len(em.names))) for k, idx in lin.items()}
        return row, poly.constant_term()

    rows, rhs = [], []
    for i, target in ((4, q[4]), (0, q[0]), (2, q[2])):
        row, const = linear_part(polys[i])
        rows.append([row["a3"], row["a4"], row["a5"]])
        # a3.. = solution of M a = (target - const) - row_a2 * a2
        rhs.append([target - const, -row["a2"]])
    sol = _solve_linear(rows, rhs)
    affine = tuple((s[0], s[1]) for s in sol)
    N = len(em.names)
    a2 = Polynomial.var(lin["a2"], N)
    values = [Polynomial.const(0, N)] * N
    values[lin["a2"]] = a2
    for name, (c0, c1) in zip(("a3", "a4", "a5"), affine):
        values[lin[name]] = a2 * c1 + c0
    x2 = polys[1].substitute(values)
    A = x2.coefficient(_unit(lin["a2"], N, 2))
    B = x2.coefficient(_unit(lin["a2"], N))
    C = x2.constant_term() - q[1]
    return Quadratic(A, B, C, affine, a1)


def _unit(idx, n, power=1):
    m = [0] * n
    m[idx] = power
    return tuple(m)


def origin_quadratic(q: Sequence) -> Quadratic:
    """The closed form from the origin, written out coefficient by coefficient."""
    q1, q2, q3, q4, q5 = (_exact(v) for v in q)
    if q4 == 0:
        raise AbnormalControlError("q4 = 0: u2 would vanish (abnormal control)")
    A = q4 ** 3 / 55440
    B = q3 * q4 / 462 - Fraction(2, 693) * q1 * q4 ** 2 + q5 * q4 ** 3 / 11088
    C = (-Fraction(179, 462) * q1 * q3 + Fraction(60, 77) * q3 ** 2 / q4 + Fraction(15, 77) * q1 ** 2 * q4
         - q3 * q4 * q5 / 154 - q1 * q4 ** 2 * q5 / 308 + q4 ** 3 * q5 ** 2 / 2772 - q2)
    affine = (
        (-360 * q3 / q4 ** 2 + 240 * q1 / q4 + 12 * q5, Fraction(-12)),
        (1440 * q3 / q4 ** 2 - 900 * q1 / q4 - 60 * q5, Fraction(30)),
        (-1200 * q3 / q4 ** 2 + 720 * q1 / q4 + 60 * q5, Fraction(-20)),
    )
    return Quadratic(A, B, C, affine, q4)


def reachability_vertex(q: Sequence) -> Fraction:
    """Right-hand side of the parabola bounding the targets reachable from the origin."""
    q1, _, q3, q4, q5 = (_exact(v) for v in q)
    if q4 == 0:
        raise AbnormalControlError("q4 = 0: u2 would vanish (abnormal control)")
    return (Fraction(5, 63) * q4 * q1 ** 2 + (-Fraction(3, 14) * q3 + q4 ** 2 * q5 / 252) * q1
            + Fraction(5, 7) * q3 ** 2 / q4 - q3 * q4 * q5 / 84 + q4 ** 3 * q5 ** 2 / 4032)


def reachable(q: Sequence, p: Sequence | None = None) -> bool:
    """Whether ``q`` is reachable with cubic ``u1`` and constant ``u2``.

    From the origin this is the parabola test, oriented by the sign of ``q4``
    (the leading coefficient of the quadratic is ``q4^3/55440``).  From any
    other ``p`` it is the sign of the eliminated quadratic's discriminant.
    """
    if p is not None and any(_exact(v) for v in p):
        return two_trailer_quadratic(q, p).discriminant >= 0
    q2, q4 = _exact(q[1]), _exact(q[3])
    gap = q2 - reachability_vertex(q)
    return gap >= 0 if q4 > 0 else gap <= 0


def _roots(quad: Quadratic) -> list:
    A, B, D = quad.A, quad.B, quad.discriminant
    if A == 0:
        if B == 0:
            raise UnreachableError("unreachable: the a2 equation degenerates")
        return [Surd(-quad.C / B)]
    if D < 0:
        raise UnreachableError(f"unreachable: discriminant {float(D):.6g} is negative")
    if D == 0:
        return [Surd(-B / (2 * A))]
    root = _exact_sqrt(D)
    if root is not None:
        roots = [Surd((-B + root) / (2 * A)), Surd((-B - root) / (2 * A))]
        return sorted(roots, key=lambda x: (abs(x.r), x.r))
    roots = [Surd(-B / (2 * A), 1 / (2 * A), D), Surd(-B / (2 * A), -1 / (2 * A), D)]
    # for conjugates r +- s sqrt(d), the larger modulus is the one with s*r > 0
    return sorted(roots, key=lambda x: (x.s * ((x.r > 0) - (x.r < 0)), x.s))


def _scalar(x: Surd):
    return x.r if x.is_rational else x


@dataclass(frozen=True)
class TwoTrailerSolution:
    law: ControlLaw
    a2: object
    discriminant: Fraction


def solve_two_trailer(q: Sequence, p: Sequence | None = None, use_closed_form: bool | None = None) -> list:
    """Control laws steering the two-trailer KR system from ``p`` to ``q`` in unit time.

    Returns one or two :class:`TwoTrailerSolution` sorted by ``|a2|``.  From
    the origin the closed-form quadratic is used unless ``use_closed_form`` is
    false; otherwise the endpoint equations are eliminated exactly.
    """
    at_origin = p is None or not any(_exact(v) for v in p)
    if use_closed_form is None:
        use_closed_form = at_origin
    if use_closed_form and not at_origin:
        raise ValueError("the closed form only covers the origin")
    quad = origin_quadratic(q) if use_closed_form else two_trailer_quadratic(q, p)
    roots = _roots(quad)
    out = []
    for a2 in roots:
        rest = [a2 * c1 + c0 for c0, c1 in quad.affine]
        coeffs = tuple(_scalar(v) for v in [a2, *rest])
        out.append(TwoTrailerSolution(ControlLaw(coeffs, quad.a1), _scalar(a2), quad.discriminant))
    return out


# trailer-level plans ---------------------------------------------------------------


@dataclass(frozen=True)
class SteeringPlan:
    """Two-trailer steering: KR controls plus the feedback that realises them."""

    zeta0: Configuration
    zetaT: Configuration
    x0: tuple
    xT: tuple
    law: ControlLaw
    a2_roots: tuple
    root_choice: str
    discriminant: Fraction
    window_parity: int

    @property
    def horizon(self) -> float:
        return float(self.law.horizon)

    @property
    def feedback(self) -> FeedbackMaps:
        return FeedbackMaps(two_trailer_chain())

    def kr_controls(self, t: float) -> tuple:
        return self.law(t)

    def trailer_controls(self, t: float, state) -> tuple:
        """``(v1, v2)`` from the inverse feedback at the current state."""
        u1, u2 = self.law(t)
        return self.feedback.to_trailer(state, u1, u2)

    def to_json(self) -> dict:
        return {
            "n": 2,
            "zeta0": self.zeta0.as_array().tolist(),
            "zetaT": self.zetaT.as_array().tolist(),
            "x0": list(self.x0),
            "xT": list(self.xT),
            "controls": self.law.to_json(),
            "horizon": self.horizon,
            "a2_roots": [float(r) for r in self.a2_roots],
            "root_choice": self.root_choice,
            "discriminant": float(self.discriminant),
            "discriminant_exact": str(self.discriminant),
            "window_parity": self.window_parity,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, data) -> "SteeringPlan":
        if isinstance(data, str):
            data = json.loads(data)
        missing = [k for k in ("zeta0", "zetaT", "x0", "xT", "controls") if k not in data]
        if missing:
            raise ValueError(f"plan JSON is missing {missing}")
        disc = data.get("discriminant_exact", data.get("discriminant", 0))
        return cls(
            Configuration.from_array(data["zeta0"]),
            Configuration.from_array(data["zetaT"]),
            tuple(float(v) for v in data["x0"]),
            tuple(float(v) for v in data["xT"]),
            ControlLaw.from_json(data["controls"]),
            tuple(float(v) for v in data.get("a2_roots", ())),
            data.get("root_choice", "min_abs"),
            _exact(disc),
            int(data.get("window_parity", 0)),
        )


def _as_configuration(z) -> Configuration:
    cfg = z if isinstance(z, Configuration) else Configuration.from_array(z)
    if cfg.n != 2:
        raise ValueError("planning is implemented for two trailers")
    return cfg


def plan(zeta0, zetaT, root_choice: str = "min_abs") -> SteeringPlan:
    """Steer the two-trailer system from ``zeta0`` to ``zetaT`` in unit time.

    Both configurations must lie in V, in windows of the same index.  When
    ``zeta0`` does not map to the KR origin the endpoint equations are solved
    from its image directly.
    """
    if root_choice not in ROOT_CHOICES:
        raise ValueError(f"root_choice must be one of {ROOT_CHOICES}")
    z0, zT = _as_configuration(zeta0), _as_configuration(zetaT)
    for name, z in (("initial", z0), ("terminal", zT)):
        if not in_domain(z):
            raise DomainError(f"{name} configuration {z.as_array().tolist()} is outside V")
    k0, kT = window_of(z0).parity, window_of(zT).parity
    if k0 != kT:
        raise WindowMismatchError(f"window indices differ (parities {k0} and {kT})")
    x0 = two_trailer_map(z0)
    xT = two_trailer_map(zT)
    sols = solve_two_trailer([float(v) for v in xT], [float(v) for v in x0])
    chosen = sols[0] if root_choice == "min_abs" else sols[-1]
    return SteeringPlan(
        z0, zT, tuple(float(v) for v in x0), tuple(float(v) for v in xT), chosen.law,
        tuple(s.a2 for s in sols), root_choice, chosen.discriminant, k0,
    )


__all__ = [
    "Surd", "ControlLaw", "EndpointMap", "Quadratic", "TwoTrailerSolution", "SteeringPlan",
    "endpoint_map", "two_trailer_endpoint", "two_trailer_quadratic", "origin_quadratic",
    "reachability_vertex", "reachable", "solve_two_trailer", "plan",
]
