"""Multivariate polynomials and polynomial vector fields over the rationals.

A :class:`Polynomial` stores a sparse map ``exponent tuple -> Fraction``.
Variables are positional: index ``i`` of an exponent tuple is the power of
``x_{i+1}``.  Instances are treated as immutable.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

from ..errors import DimensionMismatchError, PoleError


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        # exact binary expansion, never a rounded guess
        return Fraction(value)
    raise TypeError(f"cannot use {type(value).__name__} as an exact coefficient")


class Polynomial:
    __slots__ = ("terms", "num_vars", "_hash")

    def __init__(self, terms: Mapping[tuple, object] | None = None, num_vars: int = 1):
        if num_vars < 1:
            raise ValueError("num_vars must be positive")
        clean = {}
        for mono, coeff in (terms or {}).items():
            mono = tuple(mono)
            if len(mono) != num_vars:
                raise DimensionMismatchError(
                    f"monomial {mono} has length {len(mono)}, expected {num_vars}"
                )
            c = _frac(coeff)
            if c:
                clean[mono] = clean.get(mono, 0) + c
                if not clean[mono]:
                    del clean[mono]
        self.terms = clean
        self.num_vars = num_vars
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict, num_vars: int) -> "Polynomial":
        p = cls.__new__(cls)
        p.terms = terms
        p.num_vars = num_vars
        p._hash = None
        return p

    # constructors

    @classmethod
    def zero(cls, num_vars: int) -> "Polynomial":
        return cls._raw({}, num_vars)

    @classmethod
    def const(cls, value, num_vars: int) -> "Polynomial":
        c = _frac(value)
        return cls._raw({(0,) * num_vars: c} if c else {}, num_vars)

    @classmethod
    def var(cls, index: int, num_vars: int) -> "Polynomial":
        """The coordinate function of 0-based variable ``index``."""
        if not 0 <= index < num_vars:
            raise IndexError(f"variable {index} out of range for {num_vars} variables")
        mono = [0] * num_vars
        mono[index] = 1
        return cls._raw({tuple(mono): Fraction(1)}, num_vars)

    # queries

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and not any(next(iter(self.terms))))

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.num_vars, Fraction(0))

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(m) for m in self.terms), default=-1)

    def degree_in(self, index: int) -> int:
        return max((m[index] for m in self.terms), default=-1)

    def variables(self) -> frozenset:
        return frozenset(i for m in self.terms for i, e in enumerate(m) if e)

    def coefficient(self, mono: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(mono), Fraction(0))

    # arithmetic

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.num_vars != self.num_vars:
                raise DimensionMismatchError(
                    f"polynomials over {self.num_vars} and {other.num_vars} variables"
                )
            return other
        return Polynomial.const(other, self.num_vars)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m, 0) + c
            if v:
                out[m] = v
            else:
                out.pop(m, None)
        return Polynomial._raw(out, self.num_vars)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw({m: -c for m, c in self.terms.items()}, self.num_vars)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = _frac(other)
            if not c:
                return Polynomial.zero(self.num_vars)
            return Polynomial._raw({m: v * c for m, v in self.terms.items()}, self.num_vars)
        other = self._coerce(other)
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0) + c1 * c2
        return Polynomial._raw({m: c for m, c in out.items() if c}, self.num_vars)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("polynomial powers must be non-negative integers")
        result = Polynomial.const(1, self.num_vars)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.num_vars == other.num_vars and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == Polynomial.const(other, self.num_vars)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.num_vars, frozenset(self.terms.items())))
        return self._hash

    # calculus

    def diff(self, index: int) -> "Polynomial":
        out = {}
        for m, c in self.terms.items():
            e = m[index]
            if e:
                mm = list(m)
                mm[index] = e - 1
                out[tuple(mm)] = c * e
        return Polynomial._raw(out, self.num_vars)

    def antiderivative(self, index: int) -> "Polynomial":
        """Antiderivative in variable ``index`` vanishing where that variable is 0."""
        out = {}
        for m, c in self.terms.items():
            mm = list(m)
            mm[index] += 1
            out[tuple(mm)] = c / mm[index]
        return Polynomial._raw(out, self.num_vars)

    # composition and evaluation

    def substitute(self, values: Sequence) -> "Polynomial":
        """Compose with polynomials (or constants) given for every variable.

        All polynomial entries of ``values`` must share one ring; the result
        lives in that ring.
        """
        if len(values) != self.num_vars:
            raise DimensionMismatchError(
                f"substitute needs {self.num_vars} values, got {len(values)}"
            )
        target = next((v.num_vars for v in values if isinstance(v, Polynomial)), None)
        if target is None:
            return Polynomial.const(self.evaluate(values), 1)
        vals = [v if isinstance(v, Polynomial) else Polynomial.const(v, target) for v in values]
        powers: dict = {}

        def power(i, e):
            key = (i, e)
            if key not in powers:
                powers[key] = vals[i] if e == 1 else power(i, e - 1) * vals[i]
            return powers[key]

        result = Polynomial.zero(target)
        for m, c in self.terms.items():
            term = Polynomial.const(c, target)
            for i, e in enumerate(m):
                if e:
                    term = term * power(i, e)
            result = result + term
        return result

    def partial_substitute(self, assignment: Mapping[int, object]) -> "Polynomial":
        """Replace some variables by exact constants; the ring is unchanged."""
        fixed = {i: _frac(v) for i, v in assignment.items()}
        out: dict = {}
        for m, c in self.terms.items():
            mm = list(m)
            for i, v in fixed.items():
                if mm[i]:
                    c = c * v ** mm[i]
                    mm[i] = 0
            if c:
                key = tuple(mm)
                out[key] = out.get(key, 0) + c
        return Polynomial._raw({m: c for m, c in out.items() if c}, self.num_vars)

    def evaluate(self, point: Sequence):
        """Evaluate at a point.

        Exact (Fraction) when every coordinate is rational, float otherwise.
        """
        if len(point) != self.num_vars:
            raise DimensionMismatchError(
                f"point has {len(point)} coordinates, expected {self.num_vars}"
            )
        exact = all(isinstance(v, (int, Fraction)) for v in point)
        if exact:
            total = Fraction(0)
            for m, c in self.terms.items():
                term = c
                for v, e in zip(point, m):
                    if e:
                        term *= Fraction(v) ** e
                total += term
            return total
        total = 0.0
        for m, c in self.terms.items():
            term = float(c)
            for v, e in zip(point, m):
                if e:
                    term *= float(v) ** e
            total += term
        if not math.isfinite(total):
            raise PoleError("non-finite polynomial value")
        return total

    def extend(self, num_vars: int) -> "Polynomial":
        """Embed into a ring with more variables (new ones appended)."""
        if num_vars < self.num_vars:
            raise DimensionMismatchError("cannot shrink a polynomial ring")
        pad = (0,) * (num_vars - self.num_vars)
        return Polynomial._raw({m + pad: c for m, c in self.terms.items()}, num_vars)

    def permute(self, mapping: Sequence[int], num_vars: int | None = None) -> "Polynomial":
        """Rename variables: old index ``i`` becomes ``mapping[i]``."""
        n = self.num_vars if num_vars is None else num_vars
        out = {}
        for m, c in self.terms.items():
            mm = [0] * n
            for i, e in enumerate(m):
                if e:
                    mm[mapping[i]] += e
            out[tuple(mm)] = c
        return Polynomial._raw(out, n)

    def to_expr(self):
        from .expr import Expr

        total = Expr.const(0)
        for m, c in sorted(self.terms.items()):
            term = Expr.const(c)
            for i, e in enumerate(m):
                if e:
                    term = term * Expr.var(i) ** e
            total = total + term
        return total

    # text

    def format(self, names: Sequence[str] | None = None) -> str:
        if not self.terms:
            return "0"
        names = names or [f"x{i + 1}" for i in range(self.num_vars)]
        parts = []
        for m, c in sorted(self.terms.items(), key=lambda kv: (-sum(kv[0]), tuple(-e for e in kv[0]))):
            factors = [names[i] if e == 1 else f"{names[i]}^{e}" for i, e in enumerate(m) if e]
            if not factors:
                parts.append(str(c))
            elif c == 1:
                parts.append("*".join(factors))
            elif c == -1:
                parts.append("-" + "*".join(factors))
            else:
                parts.append(f"{c}*" + "*".join(factors))
        return " + ".join(parts).replace("+ -", "- ")

    def __str__(self):
        return self.format()

    def __repr__(self):
        return f"Polynomial({self.format()!r}, num_vars={self.num_vars})"


class PolyVectorField:
    """A vector field with polynomial components on R^dimension."""

    __slots__ = ("components", "dimension")

    def __init__(self, components: Iterable[Polynomial]):
        comps = tuple(components)
        if not comps:
            raise ValueError("a vector field needs at least one component")
        dim = len(comps)
        for c in comps:
            if c.num_vars != dim:
                raise DimensionMismatchError(
                    f"component over {c.num_vars} variables in a field of dimension {dim}"
                )
        self.components = comps
        self.dimension = dim

    @classmethod
    def zero(cls, dimension: int) -> "PolyVectorField":
        return cls(Polynomial.zero(dimension) for _ in range(dimension))

    @classmethod
    def coordinate(cls, index: int, dimension: int) -> "PolyVectorField":
        """The constant field d/dx_{index+1}."""
        return cls(
            Polynomial.const(1 if i == index else 0, dimension) for i in range(dimension)
        )

    @classmethod
    def from_lists(cls, comps: Sequence) -> "PolyVectorField":
        """Build from per-component ``{exponent tuple: coefficient}`` maps or constants."""
        dim = len(comps)
        out = []
        for c in comps:
            if isinstance(c, Polynomial):
                out.append(c)
            elif isinstance(c, Mapping):
                out.append(Polynomial(c, dim))
            else:
                out.append(Polynomial.const(c, dim))
        return cls(out)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def __add__(self, other: "PolyVectorField") -> "PolyVectorField":
        _check_dims(self, other)
        return PolyVectorField(a + b for a, b in zip(self.components, other.components))

    def __sub__(self, other: "PolyVectorField") -> "PolyVectorField":
        _check_dims(self, other)
        return PolyVectorField(a - b for a, b in zip(self.components, other.components))

    def __neg__(self):
        return PolyVectorField(-c for c in self.components)

    def scale(self, factor) -> "PolyVectorField":
        """Multiply by a scalar or by a polynomial function."""
        return PolyVectorField(c * factor for c in self.components)

    def __mul__(self, factor):
        return self.scale(factor)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def lift(self) -> "PolyVectorField":
        n = self.dimension + 1
        return PolyVectorField([c.extend(n) for c in self.components] + [Polynomial.zero(n)])

    def bracket(self, other: "PolyVectorField") -> "PolyVectorField":
        _check_dims(self, other)
        n = self.dimension
        out = []
        for i in range(n):
            acc = Polynomial.zero(n)
            gi, fi = other.components[i], self.components[i]
            for j in range(n):
                fj, gj = self.components[j], other.components[j]
                if not fj.is_zero() and j in gi.variables():
                    acc = acc + fj * gi.diff(j)
                if not gj.is_zero() and j in fi.variables():
                    acc = acc - gj * fi.diff(j)
            out.append(acc)
        return PolyVectorField(out)

    def lie_derivative(self, h: Polynomial) -> Polynomial:
        if h.num_vars != self.dimension:
            raise DimensionMismatchError(
                f"function over {h.num_vars} variables, field of dimension {self.dimension}"
            )
        acc = Polynomial.zero(self.dimension)
        for j in h.variables():
            fj = self.components[j]
            if not fj.is_zero():
                acc = acc + fj * h.diff(j)
        return acc

    def evaluate(self, point: Sequence):
        if len(point) != self.dimension:
            raise DimensionMismatchError(
                f"point has {len(point)} coordinates, field has dimension {self.dimension}"
            )
        out = []
        for i, c in enumerate(self.components):
            try:
                out.append(c.evaluate(point))
            except PoleError as exc:
                raise PoleError(str(exc), component=i) from None
        return out

    def evaluate_batch(self, points):
        """Evaluate at an ``(m, dimension)`` float array; returns ``(m, dimension)``."""
        import numpy as np

        pts = np.asarray(points, dtype=float)
        out = np.zeros((pts.shape[0], self.dimension))
        for i, c in enumerate(self.components):
            col = np.zeros(pts.shape[0])
            for m, coeff in c.terms.items():
                term = np.full(pts.shape[0], float(coeff))
                for j, e in enumerate(m):
                    if e:
                        term = term * pts[:, j] ** e
                col += term
            out[:, i] = col
        return out

    def to_exprs(self):
        from .expr import SmoothExprField

        return SmoothExprField([c.to_expr() for c in self.components])

    def format(self, names: Sequence[str] | None = None) -> str:
        names = names or [f"x{i + 1}" for i in range(self.dimension)]
        parts = []
        for c, name in zip(self.components, names):
            if c.is_zero():
                continue
            body = c.format(names)
            if c.is_constant() and c.constant_term() == 1:
                parts.append(f"d/d{name}")
            elif len(c.terms) > 1:
                parts.append(f"({body})*d/d{name}")
            else:
                parts.append(f"{body}*d/d{name}")
        return " + ".join(parts) if parts else "0"

    def __str__(self):
        return self.format()

    def __repr__(self):
        return f"PolyVectorField({self.format()!r})"


def _check_dims(f, g):
    if f.dimension != g.dimension:
        raise DimensionMismatchError(f"fields of dimension {f.dimension} and {g.dimension}")
