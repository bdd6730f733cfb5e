"""Vector-field algebra over exact polynomials and symbolic trig expressions.

The free functions below accept either representation:

>>> from kr_steer.field_algebra import PolyVectorField, Polynomial, lie_bracket
>>> x = [Polynomial.var(i, 3) for i in range(3)]
>>> f = PolyVectorField.coordinate(2, 3)
>>> g = PolyVectorField([Polynomial.const(1, 3), x[2], Polynomial.zero(3)])
>>> print(lie_bracket(f, g))
d/dx2
"""

from __future__ import annotations

from ..errors import DimensionMismatchError, PoleError
from .expr import (
    ONE,
    ZERO,
    CompiledExprs,
    Expr,
    SmoothExprField,
    atan,
    compile_exprs,
    cos,
    cot,
    csc,
    dag_size,
    sec,
    sin,
    tan,
)
from .polynomial import Polynomial, PolyVectorField

__all__ = [
    "Polynomial", "PolyVectorField", "Expr", "SmoothExprField", "CompiledExprs",
    "compile_exprs", "dag_size", "sin", "cos", "tan", "sec", "csc", "cot", "atan",
    "ZERO", "ONE", "lie_bracket", "lift", "lie_derivative", "eval_field",
]


def _check(f, g):
    if type(f) is not type(g):
        raise TypeError(f"cannot mix {type(f).__name__} and {type(g).__name__}")
    if f.dimension != g.dimension:
        raise DimensionMismatchError(f"fields of dimension {f.dimension} and {g.dimension}")


def lie_bracket(f, g):
    """Jacobi-Lie bracket ``[f, g] = (Dg) f - (Df) g``."""
    _check(f, g)
    return f.bracket(g)


def lift(f):
    """Extend ``f`` to one more dimension with a zero last component."""
    return f.lift()


def lie_derivative(f, h):
    """``sum_i f_i dh/dx_i`` for a polynomial or expression ``h``."""
    if isinstance(f, PolyVectorField) and isinstance(h, Expr):
        f = f.to_exprs()
    if isinstance(f, SmoothExprField) and isinstance(h, Polynomial):
        if h.num_vars != f.dimension:
            raise DimensionMismatchError("function and field dimensions differ")
        h = h.to_expr()
    return f.lie_derivative(h)


def eval_field(f, point) -> list:
    """Float evaluation; poles raise :class:`PoleError` naming the component."""
    if len(point) != f.dimension:
        raise DimensionMismatchError(
            f"point has {len(point)} coordinates, field has dimension {f.dimension}"
        )
    if isinstance(f, PolyVectorField):
        return [float(v) for v in f.evaluate([float(p) for p in point])]
    return f.evaluate(point)
