"""Kinematics of a unicycle towing n trailers with unit hitch lengths.

State ordering is ``(xi1, xi2, theta0, ..., thetan)``: the position of the
last trailer followed by the axle angles, starting from the last trailer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .field_algebra import ZERO, Expr, SmoothExprField, cos, sin

TWO_PI = 2.0 * math.pi
CLASSIFY_TOL = 1e-9


def normalize_angle(theta: float) -> float:
    """Map to (-pi, pi]; values already in range are returned unchanged."""
    theta = float(theta)
    if -math.pi < theta <= math.pi:
        return theta
    r = math.remainder(theta, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


def normalize_angles(thetas: np.ndarray) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    out = np.remainder(thetas + math.pi, TWO_PI) - math.pi
    out[out == -math.pi] = math.pi
    inside = (thetas > -math.pi) & (thetas <= math.pi)
    out[inside] = thetas[inside]
    return out


def angle_diff(a: float, b: float) -> float:
    """Signed difference ``a - b`` reduced to [-pi, pi]."""
    return math.remainder(a - b, TWO_PI)


@dataclass(frozen=True)
class Configuration:
    xi1: float
    xi2: float
    thetas: tuple

    def __post_init__(self):
        thetas = tuple(normalize_angle(t) for t in self.thetas)
        if not thetas:
            raise ValueError("a configuration needs at least theta0")
        object.__setattr__(self, "xi1", float(self.xi1))
        object.__setattr__(self, "xi2", float(self.xi2))
        object.__setattr__(self, "thetas", thetas)

    @property
    def n(self) -> int:
        return len(self.thetas) - 1

    def as_array(self) -> np.ndarray:
        return np.array([self.xi1, self.xi2, *self.thetas])

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "Configuration":
        values = [float(v) for v in values]
        return cls(values[0], values[1], tuple(values[2:]))

    def relative_angles(self) -> tuple:
        """``(theta0, theta1 - theta0, ..., thetan - theta_{n-1})`` reduced to [-pi, pi]."""
        t = self.thetas
        return (t[0],) + tuple(angle_diff(t[i], t[i - 1]) for i in range(1, len(t)))

    def to_json(self) -> dict:
        return {"xi1": self.xi1, "xi2": self.xi2, "thetas": list(self.thetas)}

    @classmethod
    def from_json(cls, data) -> "Configuration":
        if isinstance(data, str):
            data = json.loads(data)
        if isinstance(data, (list, tuple)):
            return cls.from_array(data)
        missing = [k for k in ("xi1", "xi2", "thetas") if k not in data]
        if missing:
            raise ValueError(f"configuration JSON is missing {missing}")
        return cls(data["xi1"], data["xi2"], tuple(data["thetas"]))


@dataclass(frozen=True)
class SingularityPattern:
    base: bool
    flags: tuple

    def __len__(self):
        return len(self.flags)

    @property
    def is_regular(self) -> bool:
        return not any(self.flags)


def _near_half_pi(angle: float, tol: float) -> bool:
    """True when ``angle`` is within ``tol`` of pi/2 modulo pi."""
    return abs(math.remainder(angle - math.pi / 2, math.pi)) <= tol


def classify(p: Configuration, tol: float = CLASSIFY_TOL) -> SingularityPattern:
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    t = p.thetas
    flags = tuple(_near_half_pi(t[i] - t[i - 1], tol) for i in range(1, len(t)))
    return SingularityPattern(_near_half_pi(t[0], tol), flags)


def theta_var(i: int) -> Expr:
    """Expression variable for theta_i."""
    return Expr.var(2 + i)


@lru_cache(maxsize=None)
def trailer_fields(n: int) -> tuple:
    """``(tau1, tau2)`` for n trailers, built by n prolongations of the unicycle."""
    if n < 0:
        raise ValueError("trailer count must be non-negative")
    th0 = theta_var(0)
    tau1 = SmoothExprField.coordinate(2, 3)
    tau2 = SmoothExprField([cos(th0), sin(th0), ZERO])
    for i in range(1, n + 1):
        rel = theta_var(i) - theta_var(i - 1)
        prev1, prev2 = tau1.lift(), tau2.lift()
        tau1 = SmoothExprField.coordinate(i + 2, i + 3)
        tau2 = prev1.scale(sin(rel)) + prev2.scale(cos(rel))
    return tau1, tau2


def _n_from_state(state) -> int:
    return len(state) - 3


def trailer_rhs(n: int, p, v1: float, v2: float) -> np.ndarray:
    """``tau1(p) v1 + tau2(p) v2``."""
    state = p.as_array() if isinstance(p, Configuration) else np.asarray(p, dtype=float)
    if _n_from_state(state) != n:
        raise ValueError(f"state of length {len(state)} does not describe {n} trailers")
    return _closed_form_rhs(state, v1, v2)


def _closed_form_rhs(state: np.ndarray, v1: float, v2: float) -> np.ndarray:
    # unrolled recursion: the product of cosines carries v2 down the chain
    th = state[2:]
    n = len(th) - 1
    out = np.zeros_like(state, dtype=float)
    out[-1] = v1
    speed = v2
    for i in range(n, 0, -1):
        rel = th[i] - th[i - 1]
        out[2 + i - 1] = math.sin(rel) * speed
        speed = math.cos(rel) * speed
    out[0] = math.cos(th[0]) * speed
    out[1] = math.sin(th[0]) * speed
    return out


def two_trailer_closed_form(state: Sequence[float], v1: float, v2: float) -> np.ndarray:
    """The two-trailer right-hand side written out term by term."""
    _, _, t0, t1, t2 = state
    c21, c10 = math.cos(t2 - t1), math.cos(t1 - t0)
    return np.array([
        c21 * c10 * math.cos(t0) * v2,
        c21 * c10 * math.sin(t0) * v2,
        c21 * math.sin(t1 - t0) * v2,
        math.sin(t2 - t1) * v2,
        v1,
    ])
