"""Kumpera-Ruiz normal forms and derived-flag dimensions."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np
import scipy.linalg

from .errors import AmbiguousRankError, DimensionMismatchError
from .field_algebra import Polynomial, PolyVectorField, lie_bracket

RANK_TOL = 1e-8
ZERO_ROW_TOL = 1e-12
# relative singular values strictly inside this band make the rank decision unreliable
AMBIGUOUS_BAND = (1e-9, 1e-7)


@dataclass(frozen=True)
class Regular:
    c: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "c", Fraction(self.c))

    def __str__(self):
        return f"R({self.c})"


@dataclass(frozen=True)
class Singular:
    def __str__(self):
        return "S"


Tag = Union[Regular, Singular]


@dataclass(frozen=True)
class KRWord:
    """Prolongation tags applied, in order, to the Pfaff-Darboux pair on R^3."""

    steps: tuple = ()

    base_dimension = 3

    def __post_init__(self):
        steps = tuple(self.steps)
        for s in steps:
            if not isinstance(s, (Regular, Singular)):
                raise TypeError(f"KR word step must be Regular or Singular, got {s!r}")
        object.__setattr__(self, "steps", steps)

    @property
    def dimension(self) -> int:
        return self.base_dimension + len(self.steps)

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __str__(self):
        return ".".join(str(s) for s in self.steps)

    def pattern(self) -> tuple:
        """True at singular steps; constants dropped."""
        return tuple(isinstance(s, Singular) for s in self.steps)

    @classmethod
    def parse(cls, text: str) -> "KRWord":
        """Parse the dotted notation, e.g. ``"R(0).S.R(1/2)"``; ``""`` is the empty word."""
        text = text.strip()
        if not text:
            return cls(())
        steps = []
        for tok in text.split("."):
            tok = tok.strip()
            if tok.upper() == "S":
                steps.append(Singular())
                continue
            m = re.fullmatch(r"[Rr]\(\s*([-+]?\d+(?:/\d+)?)\s*\)", tok)
            if m is None:
                raise ValueError(f"bad KR word token {tok!r}; expected 'S' or 'R(p/q)'")
            steps.append(Regular(Fraction(m.group(1))))
        return cls(tuple(steps))


@dataclass(frozen=True)
class KRPair:
    k1: PolyVectorField
    k2: PolyVectorField
    word: KRWord = field(default_factory=KRWord)

    @property
    def dimension(self) -> int:
        return self.k1.dimension

    def fields(self) -> tuple:
        return (self.k1, self.k2)


def kappa3() -> KRPair:
    """The Pfaff-Darboux pair ``(d/dx3, x3 d/dx2 + d/dx1)``."""
    x3 = Polynomial.var(2, 3)
    k1 = PolyVectorField.coordinate(2, 3)
    k2 = PolyVectorField([Polynomial.const(1, 3), x3, Polynomial.zero(3)])
    return KRPair(k1, k2, KRWord(()))


def prolong(pair: KRPair, tag: Tag) -> KRPair:
    n = pair.dimension + 1
    xn = Polynomial.var(n - 1, n)
    old1, old2 = pair.k1.lift(), pair.k2.lift()
    if isinstance(tag, Regular):
        k2 = old1.scale(xn + tag.c) + old2
    elif isinstance(tag, Singular):
        k2 = old1 + old2.scale(xn)
    else:
        raise TypeError(f"unknown prolongation tag {tag!r}")
    return KRPair(PolyVectorField.coordinate(n - 1, n), k2, KRWord(pair.word.steps + (tag,)))


def build_kr(word: KRWord | Sequence[Tag] | str) -> KRPair:
    if isinstance(word, str):
        word = KRWord.parse(word)
    pair = kappa3()
    for tag in word:
        pair = prolong(pair, tag)
    return pair


def chained_form(n: int) -> KRPair:
    """Goursat normal form on R^n, ``x_n d/dx_{n-1} + ... + x_3 d/dx_2 + d/dx_1``."""
    if n < 3:
        raise ValueError("the chained form needs n >= 3")
    return build_kr(KRWord((Regular(0),) * (n - 3)))


def numeric_rank(matrix: np.ndarray, tol: float = RANK_TOL, strict: bool = True) -> int:
    """Rank with a singular-value threshold relative to the largest one."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if m.size == 0:
        return 0
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    rel = sv / sv[0]
    if strict:
        lo, hi = AMBIGUOUS_BAND
        # the band is centred on tol in log scale
        scale = tol / RANK_TOL
        if np.any((rel > lo * scale) & (rel < hi * scale)):
            raise AmbiguousRankError(f"relative singular values {rel.tolist()} straddle tol {tol}")
    return int(np.sum(rel > tol))


def _values(fields, point):
    return np.array([np.asarray(f.evaluate(point), dtype=float) for f in fields])


def derived_flag_dims(d, point, depth: int | None = None, tol: float = RANK_TOL) -> list:
    """Dimensions of the derived flag of ``d`` at ``point``.

    ``d`` is a pair (or list) of vector fields, or a :class:`KRPair`.  Each
    level is spanned by the previous level plus pairwise brackets; to keep
    symbolic sizes bounded, a level is pruned to fields independent at the
    point (earlier survivors are always kept), which is valid where each flag member has locally constant rank
    (as for Goursat structures).
    """
    if isinstance(d, KRPair):
        d = d.fields()
    fields = list(d)
    if not fields:
        raise ValueError("need at least one vector field")
    dim = fields[0].dimension
    if len(point) != dim:
        raise DimensionMismatchError(f"point has {len(point)} coordinates, fields have dimension {dim}")
    if isinstance(fields[0], PolyVectorField):
        point = [float(p) for p in point]
    if depth is None:
        depth = dim - 2
    if depth < 0:
        raise ValueError("depth must be non-negative")

    vals = _normalized(_values(fields, point))
    rank = numeric_rank(vals, tol)
    dims = [rank]
    kept, vals = _prune([], vals[:0], fields, vals, rank)
    fresh_from = 0
    for _ in range(depth):
        new = []
        for i in range(len(kept)):
            for j in range(max(i + 1, fresh_from), len(kept)):
                new.append(lie_bracket(kept[i], kept[j]))
        # kept fields stay in front, so everything from here on is fresh
        fresh_from = len(kept)
        if new:
            new_vals = _normalized(_values(new, point))
            rank = numeric_rank(np.vstack([vals, new_vals]), tol)
            kept, vals = _prune(kept, vals, new, new_vals, rank)
        dims.append(rank)
    return dims


def _normalized(vals):
    # rows that vanish up to roundoff must stay zero, not become unit noise
    norms = np.linalg.norm(vals, axis=1)
    tiny = norms <= ZERO_ROW_TOL * max(norms.max(initial=0.0), 1.0)
    norms[tiny] = 1.0
    out = vals / norms[:, None]
    out[tiny] = 0.0
    return out


def _prune(kept, kept_vals, cand, cand_vals, rank):
    """Keep every field of ``kept`` and add the best conditioned of ``cand`` up to ``rank``."""
    need = rank - len(kept)
    if need <= 0:
        return list(kept), kept_vals
    resid = cand_vals
    if len(kept):
        q, _ = np.linalg.qr(kept_vals.T)
        resid = cand_vals - (cand_vals @ q) @ q.T
    _, _, piv = scipy.linalg.qr(resid.T, pivoting=True, mode="economic")
    pick = sorted(piv[:need])
    return list(kept) + [cand[i] for i in pick], np.vstack([kept_vals, cand_vals[pick]])


__all__ = [
    "Regular", "Singular", "KRWord", "KRPair", "kappa3", "prolong", "build_kr",
    "chained_form", "derived_flag_dims", "numeric_rank",
]
