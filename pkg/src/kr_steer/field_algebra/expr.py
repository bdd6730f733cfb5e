"""Closed-form expression trees over trigonometric functions.

Nodes are hash-consed, so structurally equal subtrees are the same object and
a symbolic computation forms a DAG.  Only local rewrite rules are applied at
construction (neutral elements, absorbing zero, constant folding); there is
no global simplification, so correctness is checked by evaluation.

Evaluation goes through generated straight-line code (one statement per DAG
node), either with the ``math`` module for a single point or with numpy for a
batch of points.  Poles raise :class:`~kr_steer.errors.PoleError`.
"""

from __future__ import annotations

import math
import threading
import weakref
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ..errors import DimensionMismatchError, PoleError

#: absolute threshold under which a denominator counts as zero
POLE_EPS = 1e-12

CONST, VAR = "const", "var"
ADD, SUB, MUL, DIV, POW = "add", "sub", "mul", "div", "pow"
SIN, COS, TAN, SEC, CSC, COT, ATAN = "sin", "cos", "tan", "sec", "csc", "cot", "atan"
UNARY = (SIN, COS, TAN, SEC, CSC, COT, ATAN)

_TABLE: "weakref.WeakValueDictionary" = weakref.WeakValueDictionary()
_LOCK = threading.Lock()


class Expr:
    """An interned expression node.  Build with the module functions/operators."""

    __slots__ = ("op", "args", "value", "varmask", "_derivs", "__weakref__")

    def __init__(self, *a, **k):
        raise TypeError("use Expr.const, Expr.var or the module-level builders")

    # construction

    @staticmethod
    def _intern(op, args, value):
        key = (op, value, args)
        with _LOCK:
            node = _TABLE.get(key)
            if node is None:
                node = object.__new__(Expr)
                node.op = op
                node.args = args
                node.value = value
                mask = 0
                if op == VAR:
                    mask = 1 << value
                for a in args:
                    mask |= a.varmask
                node.varmask = mask
                node._derivs = {}
                _TABLE[key] = node
        return node

    @staticmethod
    def const(value) -> "Expr":
        if isinstance(value, float):
            value = Fraction(value)
        return Expr._intern(CONST, (), Fraction(value))

    @staticmethod
    def var(index: int) -> "Expr":
        if index < 0:
            raise ValueError("variable index must be non-negative")
        return Expr._intern(VAR, (), int(index))

    # predicates

    def is_const(self, value=None) -> bool:
        return self.op == CONST and (value is None or self.value == value)

    def depends_on(self, index: int) -> bool:
        return bool((self.varmask >> index) & 1)

    def variables(self) -> frozenset:
        m, i, out = self.varmask, 0, []
        while m:
            if m & 1:
                out.append(i)
            m >>= 1
            i += 1
        return frozenset(out)

    # operators

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return mul(Expr.const(-1), self)

    def __pow__(self, k):
        return power(self, k)

    # calculus

    def diff(self, index: int) -> "Expr":
        """Symbolic partial derivative with respect to variable ``index``."""
        if not self.depends_on(index):
            return ZERO
        cached = self._derivs.get(index)
        if cached is not None:
            return cached
        d = _derivative(self, index)
        self._derivs[index] = d
        return d

    # evaluation

    def __call__(self, point):
        """Float value at ``point`` (which may carry unused trailing coordinates)."""
        return compile_exprs([self], len(point))(point)[0]

    def __str__(self):
        return to_string(self)

    def __repr__(self):
        text = to_string(self)
        if len(text) > 120:
            text = text[:117] + "..."
        return f"Expr({text})"


def _lift(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, Fraction, float)):
        return Expr.const(v)
    raise TypeError(f"cannot combine Expr with {type(v).__name__}")


ZERO = Expr.const(0)
ONE = Expr.const(1)


def add(a: Expr, b: Expr) -> Expr:
    if a.op == CONST and b.op == CONST:
        return Expr.const(a.value + b.value)
    if a is ZERO:
        return b
    if b is ZERO:
        return a
    return Expr._intern(ADD, (a, b), None)


def sub(a: Expr, b: Expr) -> Expr:
    if a.op == CONST and b.op == CONST:
        return Expr.const(a.value - b.value)
    if b is ZERO:
        return a
    if a is b:
        return ZERO
    return Expr._intern(SUB, (a, b), None)


def mul(a: Expr, b: Expr) -> Expr:
    if a.op == CONST and b.op == CONST:
        return Expr.const(a.value * b.value)
    if a is ZERO or b is ZERO:
        return ZERO
    if a is ONE:
        return b
    if b is ONE:
        return a
    # keep constants on the left so -1*(-1*e) folds
    if b.op == CONST:
        a, b = b, a
    if a.op == CONST and b.op == MUL and b.args[0].op == CONST:
        return mul(Expr.const(a.value * b.args[0].value), b.args[1])
    return Expr._intern(MUL, (a, b), None)


def div(a: Expr, b: Expr) -> Expr:
    if b is ZERO:
        raise PoleError("division by the literal constant zero")
    if a is ZERO:
        return ZERO
    if b is ONE:
        return a
    if a.op == CONST and b.op == CONST:
        return Expr.const(a.value / b.value)
    return Expr._intern(DIV, (a, b), None)


def power(a: Expr, k) -> Expr:
    if not isinstance(k, int) or isinstance(k, bool):
        raise TypeError("Expr powers must be integers")
    if k == 0:
        return ONE
    if k == 1:
        return a
    if a.op == CONST:
        if a.value == 0 and k < 0:
            raise PoleError("negative power of zero")
        return Expr.const(a.value**k)
    if a.op == POW:
        return power(a.args[0], a.value * k)
    return Expr._intern(POW, (a,), k)


def _unary(op):
    def build(a) -> Expr:
        a = _lift(a)
        if a is ZERO and op in (SIN, TAN, ATAN):
            return ZERO
        if a is ZERO and op in (COS, SEC):
            return ONE
        return Expr._intern(op, (a,), None)

    build.__name__ = op
    return build


sin, cos, tan, sec, csc, cot, atan = (_unary(op) for op in UNARY)


def _derivative(e: Expr, i: int) -> Expr:
    op = e.op
    if op == VAR:
        return ONE if e.value == i else ZERO
    if op == ADD:
        return add(e.args[0].diff(i), e.args[1].diff(i))
    if op == SUB:
        return sub(e.args[0].diff(i), e.args[1].diff(i))
    if op == MUL:
        a, b = e.args
        return add(mul(a.diff(i), b), mul(a, b.diff(i)))
    if op == DIV:
        a, b = e.args
        da, db = a.diff(i), b.diff(i)
        if db is ZERO:
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, 2))
    if op == POW:
        a, k = e.args[0], e.value
        return mul(mul(Expr.const(k), power(a, k - 1)), a.diff(i))
    a = e.args[0]
    da = a.diff(i)
    if op == SIN:
        inner = cos(a)
    elif op == COS:
        inner = -sin(a)
    elif op == TAN:
        inner = power(sec(a), 2)
    elif op == SEC:
        inner = mul(sec(a), tan(a))
    elif op == CSC:
        inner = -mul(csc(a), cot(a))
    elif op == COT:
        inner = -power(csc(a), 2)
    elif op == ATAN:
        inner = div(ONE, add(ONE, power(a, 2)))
    else:  # pragma: no cover
        raise ValueError(f"unknown node {op}")
    return mul(inner, da)


# traversal ---------------------------------------------------------------


def topological(exprs: Iterable[Expr]) -> list:
    """Unique nodes reachable from ``exprs``, children before parents."""
    seen = set()
    order = []
    for root in exprs:
        if id(root) in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for a in reversed(node.args):
                if id(a) not in seen:
                    stack.append((a, False))
    return order


def dag_size(exprs: Iterable[Expr]) -> int:
    return len(topological(exprs))


def to_string(e: Expr) -> str:
    memo: dict = {}
    for node in topological([e]):
        memo[id(node)] = _fmt(node, memo)
    return memo[id(e)]


def _fmt(node, memo):
    op = node.op
    if op == CONST:
        v = node.value
        return str(v) if v >= 0 else f"({v})"
    if op == VAR:
        return f"x{node.value + 1}"
    args = [memo[id(a)] for a in node.args]
    if op == ADD:
        return f"({args[0]} + {args[1]})"
    if op == SUB:
        return f"({args[0]} - {args[1]})"
    if op == MUL:
        return f"{args[0]}*{args[1]}"
    if op == DIV:
        return f"({args[0]})/({args[1]})"
    if op == POW:
        return f"{args[0]}^{node.value}" if node.args[0].op in (VAR, CONST) or node.args[0].op in UNARY else f"({args[0]})^{node.value}"
    return f"{op}({args[0]})"


# evaluation ----------------------------------------------------------------


def _scalar_namespace():
    def _div(a, b):
        if abs(b) <= POLE_EPS:
            raise PoleError("division by zero")
        return a / b

    def _tan(a):
        c = math.cos(a)
        if abs(c) <= POLE_EPS:
            raise PoleError("tan pole")
        return math.sin(a) / c

    def _sec(a):
        c = math.cos(a)
        if abs(c) <= POLE_EPS:
            raise PoleError("sec pole")
        return 1.0 / c

    def _csc(a):
        s = math.sin(a)
        if abs(s) <= POLE_EPS:
            raise PoleError("csc pole")
        return 1.0 / s

    def _cot(a):
        s = math.sin(a)
        if abs(s) <= POLE_EPS:
            raise PoleError("cot pole")
        return math.cos(a) / s

    def _pow(a, k):
        if k < 0:
            return _div(1.0, a ** (-k))
        return a**k

    def _out(vals, m):
        for v in vals:
            if not math.isfinite(v):
                raise PoleError("non-finite value")
        return vals

    return {
        "_sin": math.sin, "_cos": math.cos, "_atan": math.atan, "_tan": _tan,
        "_sec": _sec, "_csc": _csc, "_cot": _cot, "_div": _div, "_pow": _pow,
        "_out": _out,
    }


def _array_namespace():
    def _guard(d, what):
        if np.any(np.abs(d) <= POLE_EPS):
            raise PoleError(what)

    def _div(a, b):
        _guard(b, "division by zero")
        return a / b

    def _tan(a):
        c = np.cos(a)
        _guard(c, "tan pole")
        return np.sin(a) / c

    def _sec(a):
        c = np.cos(a)
        _guard(c, "sec pole")
        return 1.0 / c

    def _csc(a):
        s = np.sin(a)
        _guard(s, "csc pole")
        return 1.0 / s

    def _cot(a):
        s = np.sin(a)
        _guard(s, "cot pole")
        return np.cos(a) / s

    def _pow(a, k):
        if k < 0:
            return _div(1.0, a ** (-k))
        return a**k

    def _out(vals, m):
        arr = np.empty((m, len(vals)))
        for j, v in enumerate(vals):
            arr[:, j] = v
        if not np.all(np.isfinite(arr)):
            raise PoleError("non-finite value")
        return arr

    return {
        "_sin": np.sin, "_cos": np.cos, "_atan": np.arctan, "_tan": _tan,
        "_sec": _sec, "_csc": _csc, "_cot": _cot, "_div": _div, "_pow": _pow,
        "_out": _out,
    }


_FUNC = {SIN: "_sin", COS: "_cos", TAN: "_tan", SEC: "_sec", CSC: "_csc", COT: "_cot", ATAN: "_atan"}


def _codegen(exprs: Sequence[Expr]) -> str:
    order = topological(exprs)
    names = {}
    lines = ["def _f(x, m):"]
    for k, node in enumerate(order):
        op = node.op
        if op == CONST:
            names[id(node)] = repr(float(node.value))
            continue
        if op == VAR:
            names[id(node)] = f"x[{node.value}]"
            continue
        a = [names[id(c)] for c in node.args]
        if op == ADD:
            rhs = f"{a[0]} + {a[1]}"
        elif op == SUB:
            rhs = f"{a[0]} - {a[1]}"
        elif op == MUL:
            rhs = f"{a[0]} * {a[1]}"
        elif op == DIV:
            rhs = f"_div({a[0]}, {a[1]})"
        elif op == POW:
            rhs = f"_pow({a[0]}, {node.value})"
        else:
            rhs = f"{_FUNC[op]}({a[0]})"
        name = f"t{k}"
        lines.append(f"    {name} = {rhs}")
        names[id(node)] = name
    lines.append("    return _out([" + ", ".join(names[id(e)] for e in exprs) + "], m)")
    return "\n".join(lines)


class CompiledExprs:
    """Evaluator for a fixed list of expressions over ``num_vars`` variables.

    ``__call__`` takes one point and returns a list of floats; ``batch`` takes
    an ``(m, num_vars)`` array and returns an ``(m, len(exprs))`` array.
    """

    def __init__(self, exprs: Sequence[Expr], num_vars: int | None = None):
        self.exprs = tuple(exprs)
        need = max((e.varmask.bit_length() for e in self.exprs), default=0)
        self.num_vars = need if num_vars is None else num_vars
        if need > self.num_vars:
            raise DimensionMismatchError(
                f"expressions use {need} variables, evaluator declared for {self.num_vars}"
            )
        src = _codegen(self.exprs)
        code = compile(src, "<kr_steer.expr>", "exec")
        ns_s, ns_a = _scalar_namespace(), _array_namespace()
        exec(code, ns_s)
        exec(code, ns_a)
        self._scalar = ns_s["_f"]
        self._array = ns_a["_f"]

    def _check(self, n):
        if n != self.num_vars:
            raise DimensionMismatchError(f"point has {n} coordinates, expected {self.num_vars}")

    def __call__(self, point) -> list:
        pt = [float(v) for v in point]
        self._check(len(pt))
        try:
            return self._scalar(pt, 1)
        except PoleError:
            raise PoleError(*self._locate(pt)) from None
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise PoleError(f"{exc}") from None

    def batch(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        self._check(pts.shape[1])
        cols = [pts[:, j] for j in range(pts.shape[1])]
        with np.errstate(all="ignore"):
            try:
                return self._array(cols, pts.shape[0])
            except PoleError:
                for row in pts:
                    try:
                        self._scalar(list(row), 1)
                    except PoleError:
                        raise PoleError(*self._locate(list(row))) from None
                raise

    def _locate(self, pt):
        for i, e in enumerate(self.exprs):
            try:
                compile_exprs([e], self.num_vars)._scalar(pt, 1)
            except (PoleError, ZeroDivisionError, OverflowError, ValueError) as exc:
                return (f"{exc} at {pt}", i)
        return (f"pole at {pt}", None)


def compile_exprs(exprs: Sequence[Expr], num_vars: int | None = None) -> CompiledExprs:
    return CompiledExprs(exprs, num_vars)


class SmoothExprField:
    """A vector field whose components are :class:`Expr` trees."""

    __slots__ = ("components", "dimension", "_compiled")

    def __init__(self, components: Iterable[Expr]):
        comps = tuple(_lift(c) for c in components)
        if not comps:
            raise ValueError("a vector field needs at least one component")
        for c in comps:
            if c.varmask.bit_length() > len(comps):
                raise DimensionMismatchError("component uses a variable beyond the field dimension")
        self.components = comps
        self.dimension = len(comps)
        self._compiled = None

    @classmethod
    def coordinate(cls, index: int, dimension: int) -> "SmoothExprField":
        return cls(ONE if i == index else ZERO for i in range(dimension))

    def __eq__(self, other):
        if not isinstance(other, SmoothExprField):
            return NotImplemented
        return self.dimension == other.dimension and all(
            a is b for a, b in zip(self.components, other.components)
        )

    def __hash__(self):
        return hash(tuple(id(c) for c in self.components))

    def __add__(self, other):
        _same(self, other)
        return SmoothExprField(a + b for a, b in zip(self.components, other.components))

    def __sub__(self, other):
        _same(self, other)
        return SmoothExprField(a - b for a, b in zip(self.components, other.components))

    def scale(self, factor) -> "SmoothExprField":
        factor = _lift(factor)
        return SmoothExprField(factor * c for c in self.components)

    def lift(self) -> "SmoothExprField":
        return SmoothExprField(self.components + (ZERO,))

    def is_zero(self) -> bool:
        return all(c is ZERO for c in self.components)

    def bracket(self, other: "SmoothExprField") -> "SmoothExprField":
        _same(self, other)
        n = self.dimension
        out = []
        for i in range(n):
            gi, fi = other.components[i], self.components[i]
            acc = ZERO
            for j in range(n):
                fj, gj = self.components[j], other.components[j]
                if fj is not ZERO and gi.depends_on(j):
                    acc = acc + fj * gi.diff(j)
                if gj is not ZERO and fi.depends_on(j):
                    acc = acc - gj * fi.diff(j)
            out.append(acc)
        return SmoothExprField(out)

    def lie_derivative(self, h: Expr) -> Expr:
        h = _lift(h)
        if h.varmask.bit_length() > self.dimension:
            raise DimensionMismatchError("function depends on a variable beyond the field dimension")
        acc = ZERO
        for j in sorted(h.variables()):
            fj = self.components[j]
            if fj is not ZERO:
                acc = acc + fj * h.diff(j)
        return acc

    @property
    def compiled(self) -> CompiledExprs:
        if self._compiled is None:
            self._compiled = compile_exprs(self.components, self.dimension)
        return self._compiled

    def evaluate(self, point) -> list:
        return self.compiled(point)

    def evaluate_batch(self, points) -> np.ndarray:
        return self.compiled.batch(points)

    def __str__(self):
        return "(" + ", ".join(to_string(c) for c in self.components) + ")"

    def __repr__(self):
        return f"SmoothExprField(dimension={self.dimension})"


def _same(f, g):
    if f.dimension != g.dimension:
        raise DimensionMismatchError(f"fields of dimension {f.dimension} and {g.dimension}")
