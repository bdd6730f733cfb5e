"""Exact Lie-algebra closure of polynomial vector fields, lower central series
and ad-nilpotency.

Fields are compared as vectors of rational coefficients indexed by
``(component, monomial)``; independence is decided by sparse row reduction
over :class:`fractions.Fraction`, so closure never depends on a tolerance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import ClosureBudgetError, NotNilpotentError
from .field_algebra import PolyVectorField
from .kr_forms import KRPair

log = logging.getLogger(__name__)

DEFAULT_MAX_DIM = 200


def _flatten(f: PolyVectorField) -> dict:
    out = {}
    for i, comp in enumerate(f.components):
        for mono, c in comp.terms.items():
            out[(i, mono)] = c
    return out


class SparseEchelon:
    """Incremental row echelon form that remembers how each row was built.

    Rows are sparse dicts.  ``combo`` of a row expresses it in terms of the
    original inserted vectors (indexed by insertion order).
    """

    def __init__(self):
        self.rows = []  # (pivot_key, row dict, combo dict)

    def __len__(self):
        return len(self.rows)

    def reduce(self, vec: dict):
        """Return ``(residual, coordinates)`` where ``vec = residual + sum coords[k]*v_k``."""
        v = dict(vec)
        coords: dict = {}
        for pivot, row, combo in self.rows:
            c = v.get(pivot)
            if not c:
                continue
            factor = c / row[pivot]
            for key, val in row.items():
                nv = v.get(key, 0) - factor * val
                if nv:
                    v[key] = nv
                else:
                    v.pop(key, None)
            for k, val in combo.items():
                nc = coords.get(k, 0) + factor * val
                if nc:
                    coords[k] = nc
                else:
                    coords.pop(k, None)
        return v, coords

    def insert(self, residual: dict, coords: dict, index: int):
        """Add a reduced non-zero residual of original vector ``index``."""
        combo = {k: -v for k, v in coords.items()}
        combo[index] = combo.get(index, 0) + 1
        pivot = min(residual)
        self.rows.append((pivot, residual, combo))

    def try_add(self, vec: dict, index: int):
        """Insert if independent.  Returns coordinates in the inserted vectors if dependent."""
        res, coords = self.reduce(vec)
        if res:
            self.insert(res, coords, index)
            return None
        return coords


@dataclass(frozen=True)
class LieBasis:
    elements: tuple
    generators: tuple
    bracket_table: dict = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.elements)

    def bracket_coords(self, i: int, j: int) -> tuple:
        """Coordinates of ``[e_i, e_j]`` in the basis."""
        if i == j:
            return (Fraction(0),) * self.dimension
        if i < j:
            return self.bracket_table[(i, j)]
        return tuple(-c for c in self.bracket_table[(j, i)])

    def combine(self, coords: Sequence) -> PolyVectorField:
        dim = self.elements[0].dimension
        acc = PolyVectorField.zero(dim)
        for c, e in zip(coords, self.elements):
            if c:
                acc = acc + e.scale(c)
        return acc

    def ad_matrix(self, coords: Sequence) -> list:
        """Matrix of ``ad_e`` (columns = images of basis vectors) for ``e = sum coords*e_k``."""
        n = self.dimension
        mat = [[Fraction(0)] * n for _ in range(n)]
        for k, ck in enumerate(coords):
            if not ck:
                continue
            for j in range(n):
                col = self.bracket_coords(k, j)
                for i in range(n):
                    if col[i]:
                        mat[i][j] += ck * col[i]
        return mat


def generate_algebra(pair, max_dim: int = DEFAULT_MAX_DIM) -> LieBasis:
    """Close the span of the generators under brackets, breadth first.

    ``pair`` is a :class:`KRPair` or any sequence of :class:`PolyVectorField`.
    Raises :class:`ClosureBudgetError` if more than ``max_dim`` independent
    fields appear.
    """
    if max_dim < 2:
        raise ValueError("max_dim must be at least 2")
    gens = list(pair.fields()) if isinstance(pair, KRPair) else list(pair)
    ech = SparseEchelon()
    elements: list = []
    generators = []
    for g in gens:
        if ech.try_add(_flatten(g), len(elements)) is None:
            generators.append(len(elements))
            elements.append(g)
    raw: dict = {}
    frontier = 0
    while True:
        start = len(elements)
        for j in range(frontier, start):
            for i in range(j):
                _bracket_into(elements, ech, raw, i, j, max_dim)
        # brackets within the old block were done in earlier sweeps
        frontier = start
        if len(elements) == start:
            break
        log.debug("closure sweep added %d elements (total %d)", len(elements) - start, len(elements))
        # pairs (old, new) and (new, new) are handled by the next sweep
    n = len(elements)
    table = {}
    for key, coords in raw.items():
        row = [Fraction(0)] * n
        for k, v in coords.items():
            row[k] = Fraction(v)
        table[key] = tuple(row)
    return LieBasis(tuple(elements), tuple(generators), table)


def _bracket_into(elements, ech, raw, i, j, max_dim):
    b = elements[i].bracket(elements[j])
    vec = _flatten(b)
    coords = ech.try_add(vec, len(elements))
    if coords is None:
        if len(elements) >= max_dim:
            raise ClosureBudgetError(
                f"algebra exceeds {max_dim} dimensions without closing"
            )
        raw[(i, j)] = {len(elements): 1}
        elements.append(b)
    else:
        raw[(i, j)] = coords


class _DenseSpan:
    """Row echelon over dense Fraction vectors; tracks a basis of the span."""

    def __init__(self, n):
        self.n = n
        self.ech = SparseEchelon()
        self.basis: list = []

    def add(self, vec) -> bool:
        sparse = {k: v for k, v in enumerate(vec) if v}
        if not sparse:
            return False
        if self.ech.try_add(sparse, len(self.basis)) is None:
            self.basis.append(tuple(vec))
            return True
        return False

    def contains(self, vec) -> bool:
        sparse = {k: v for k, v in enumerate(vec) if v}
        res, _ = self.ech.reduce(sparse)
        return not res

    def __len__(self):
        return len(self.basis)


@dataclass(frozen=True)
class LowerCentralSeries:
    dims: tuple
    subspaces: tuple  # each a tuple of coordinate vectors spanning D_k
    nilpotent: bool
    nilindex: int | None

    def to_dict(self):
        return {"dims": list(self.dims), "nilpotent": self.nilpotent, "nilindex": self.nilindex}


def lower_central_series(basis: LieBasis) -> LowerCentralSeries:
    """``D_0 = g``, ``D_k = [g, D_{k-1}]`` until zero or stabilisation."""
    n = basis.dimension
    current = [tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)]
    dims = [n]
    spaces = [tuple(current)]
    while current:
        span = _DenseSpan(n)
        for vec in current:
            for k in range(n):
                img = [Fraction(0)] * n
                for j, cj in enumerate(vec):
                    if cj:
                        col = basis.bracket_coords(k, j)
                        for i in range(n):
                            if col[i]:
                                img[i] += cj * col[i]
                span.add(img)
        nxt = span.basis
        if len(nxt) == len(current):
            return LowerCentralSeries(tuple(dims), tuple(spaces), False, None)
        dims.append(len(nxt))
        spaces.append(tuple(nxt))
        current = nxt
    return LowerCentralSeries(tuple(dims), tuple(spaces), True, len(dims) - 1)


def subspace_contains(outer: Sequence, inner: Sequence) -> bool:
    """Exact check that every vector of ``inner`` lies in the span of ``outer``."""
    if not inner:
        return True
    span = _DenseSpan(len(inner[0]))
    for v in outer:
        span.add(v)
    return all(span.contains(v) for v in inner)


def _matmul(a, b):
    n = len(a)
    out = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        ai = a[i]
        oi = out[i]
        for k in range(n):
            if ai[k]:
                bk = b[k]
                for j in range(n):
                    if bk[j]:
                        oi[j] += ai[k] * bk[j]
    return out


def ad_nilpotency_check(basis: LieBasis, element_index: int) -> int:
    """Smallest ``m`` with ``(ad e)^m = 0`` for the basis element ``e``."""
    n = basis.dimension
    if not 0 <= element_index < n:
        raise IndexError(f"element {element_index} out of range for dimension {n}")
    coords = [Fraction(int(k == element_index)) for k in range(n)]
    ad = basis.ad_matrix(coords)
    power = ad
    for m in range(1, n + 1):
        if all(not v for row in power for v in row):
            return m
        power = _matmul(power, ad)
    raise NotNilpotentError(f"ad of element {element_index} is not nilpotent")


def nilpotency_report(basis: LieBasis) -> dict:
    lcs = lower_central_series(basis)
    ad_orders = {}
    for g in basis.generators:
        try:
            ad_orders[str(g)] = ad_nilpotency_check(basis, g)
        except NotNilpotentError:
            ad_orders[str(g)] = None
    return {
        "dimension": basis.dimension,
        "lower_central_series": list(lcs.dims),
        "nilpotent": lcs.nilpotent,
        "nilindex": lcs.nilindex,
        "generator_ad_orders": ad_orders,
    }
