"""Conversion of the n-trailer system into Kumpera-Ruiz normal form.

The chain of coordinate functions ``x_1 .. x_{n+3}`` and the triangular
feedback ``u1 = nu*v1 + eta*v2``, ``u2 = mu*v2`` are built stage by stage,
choosing at each stage the formula whose denominator does not vanish at the
base point.  The result satisfies

    phi_*(tau1) = nu * kappa1,      phi_*(tau2) = eta * kappa1 + mu * kappa2

for the KR pair whose word has ``S`` at singular stages and ``R(0)`` at
regular ones (coordinates are not centred at the base point).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from .errors import ConversionError, DomainError, PoleError, SizeBudgetError
from .field_algebra import ZERO, Expr, compile_exprs, cos, cot, dag_size, sin, tan
from .kr_forms import KRPair, KRWord, Regular, Singular, build_kr
from .trailer_model import CLASSIFY_TOL, Configuration, angle_diff, classify, theta_var, trailer_fields

TAN, COT, REGULAR, SINGULAR = "tan", "cot", "regular", "singular"
NODE_CAP = 10**6
PREMISE_TOL = 1e-9
FD_STEP = 1e-5


@lru_cache(maxsize=None)
def _stage_exprs(branches: tuple) -> tuple:
    """Coordinate and feedback expressions for a branch word; cached per word."""
    n = len(branches) - 1
    xi1, xi2, th0 = Expr.var(0), Expr.var(1), theta_var(0)
    if branches[0] == TAN:
        xs = [xi1, xi2, tan(th0)]
        mu = [cos(th0)]
    elif branches[0] == COT:
        xs = [xi2, xi1, cot(th0)]
        mu = [sin(th0)]
    else:
        raise ValueError(f"stage 0 branch must be {TAN!r} or {COT!r}")
    tau1, tau2 = trailer_fields(0)
    nu = [tau1.lie_derivative(xs[2])]
    eta = [tau2.lie_derivative(xs[2])]
    for i in range(1, n + 1):
        rel = theta_var(i) - theta_var(i - 1)
        s, c = sin(rel), cos(rel)
        lead = s * nu[i - 1] + c * eta[i - 1]
        base = c * mu[i - 1]
        if branches[i] == REGULAR:
            x_new, mu_new = lead / base, base
        elif branches[i] == SINGULAR:
            x_new, mu_new = base / lead, lead
        else:
            raise ValueError(f"stage {i} branch must be {REGULAR!r} or {SINGULAR!r}")
        tau1, tau2 = trailer_fields(i)
        xs.append(x_new)
        mu.append(mu_new)
        nu.append(tau1.lie_derivative(x_new))
        eta.append(tau2.lie_derivative(x_new))
        size = dag_size(xs + nu + eta)
        if size > NODE_CAP:
            raise SizeBudgetError(f"conversion expressions exceed {NODE_CAP} nodes at stage {i}")
    return tuple(xs), tuple(mu), tuple(nu), tuple(eta)


def branches_for(p: Configuration, tol: float = CLASSIFY_TOL) -> tuple:
    pattern = classify(p, tol)
    first = COT if pattern.base else TAN
    return (first,) + tuple(SINGULAR if f else REGULAR for f in pattern.flags)


def word_for_branches(branches: Sequence[str]) -> KRWord:
    return KRWord(tuple(Singular() if b == SINGULAR else Regular(0) for b in branches[1:]))


@dataclass(frozen=True)
class ConversionChain:
    n: int
    base_point: Configuration
    branch_word: tuple
    x_funcs: tuple = field(repr=False)
    mu: tuple = field(repr=False)
    nu: tuple = field(repr=False)
    eta: tuple = field(repr=False)
    kr_target: KRWord = field(default_factory=KRWord)

    @property
    def dimension(self) -> int:
        return self.n + 3

    @cached_property
    def kr_pair(self) -> KRPair:
        return build_kr(self.kr_target)

    @cached_property
    def _x_eval(self):
        return compile_exprs(self.x_funcs, self.dimension)

    @cached_property
    def _fb_eval(self):
        return compile_exprs((self.nu[-1], self.eta[-1], self.mu[-1]), self.dimension)

    @cached_property
    def _stage_eval(self):
        return compile_exprs(self.nu + self.mu + self.eta, self.dimension)

    def forward_map(self, zeta) -> np.ndarray:
        return np.array(self._x_eval(_state(zeta)))

    def forward_map_batch(self, states) -> np.ndarray:
        return self._x_eval.batch(states)

    def feedback(self, zeta) -> tuple:
        """``(nu_n, eta_n, mu_n)`` at ``zeta``."""
        return tuple(self._fb_eval(_state(zeta)))

    def feedback_batch(self, states) -> np.ndarray:
        return self._fb_eval.batch(states)

    def stage_values(self, zeta) -> dict:
        vals = self._stage_eval(_state(zeta))
        k = self.n + 1
        return {"nu": vals[:k], "mu": vals[k:2 * k], "eta": vals[2 * k:]}

    def realized_constants(self) -> list:
        """Constants of the regular prolongations once coordinates are centred at the base point."""
        x = self.forward_map(self.base_point)
        return [None if b == SINGULAR else float(x[i + 3]) for i, b in enumerate(self.branch_word[1:])]

    def report(self, expressions: bool = False) -> dict:
        out = {
            "n": self.n,
            "base_point": self.base_point.to_json(),
            "branch_word": list(self.branch_word),
            "kr_word": str(self.kr_target),
            "x_at_base": [float(v) for v in self.forward_map(self.base_point)],
        }
        fb = self.feedback(self.base_point)
        out["feedback_at_base"] = {"nu": fb[0], "eta": fb[1], "mu": fb[2]}
        if expressions:
            out["x_funcs"] = [str(e) for e in self.x_funcs]
            out["nu"] = str(self.nu[-1])
            out["eta"] = str(self.eta[-1])
            out["mu"] = str(self.mu[-1])
        return out


def _state(zeta) -> list:
    if isinstance(zeta, Configuration):
        return list(zeta.as_array())
    return [float(v) for v in zeta]


def build_chain(n: int, p: Configuration, branches: Sequence[str] | None = None,
                check: bool = True, tol: float = CLASSIFY_TOL) -> ConversionChain:
    """Build the conversion chain for ``n`` trailers around ``p``.

    ``branches`` overrides the classification of ``p`` (useful for testing a
    deliberately wrong branch).  With ``check`` on, every ``nu_i`` and
    ``mu_i`` must be non-zero at ``p``.
    """
    if n < 0:
        raise ValueError("trailer count must be non-negative")
    if p.n != n:
        raise ValueError(f"configuration has {p.n} trailers, expected {n}")
    branches = tuple(branches) if branches is not None else branches_for(p, tol)
    if len(branches) != n + 1:
        raise ValueError(f"need {n + 1} branches, got {len(branches)}")
    xs, mu, nu, eta = _stage_exprs(branches)
    chain = ConversionChain(n, p, branches, xs, mu, nu, eta, word_for_branches(branches))
    if check:
        try:
            vals = chain.stage_values(p)
        except PoleError as exc:
            raise ConversionError(f"stage functions have a pole at the base point: {exc}") from None
        for name in ("nu", "mu"):
            for i, v in enumerate(vals[name]):
                if abs(v) <= PREMISE_TOL:
                    raise ConversionError(f"{name}_{i} vanishes at the base point (branch misclassified?)")
    return chain


@dataclass(frozen=True)
class FeedbackMaps:
    """Forward ``(nu, eta, mu)`` and inverse ``(1/nu, -eta/(mu nu), 1/mu)`` feedback."""

    chain: ConversionChain

    def forward(self, zeta) -> tuple:
        return self.chain.feedback(zeta)

    def inverse(self, zeta) -> tuple:
        nu, eta, mu = self.chain.feedback(zeta)
        if abs(nu) <= PREMISE_TOL or abs(mu) <= PREMISE_TOL:
            raise PoleError(f"feedback is singular at {list(_state(zeta))}")
        return 1.0 / nu, -eta / (mu * nu), 1.0 / mu

    def to_kr(self, zeta, v1: float, v2: float) -> tuple:
        nu, eta, mu = self.forward(zeta)
        return nu * v1 + eta * v2, mu * v2

    def to_trailer(self, zeta, u1: float, u2: float) -> tuple:
        nu_h, eta_h, mu_h = self.inverse(zeta)
        return nu_h * u1 + eta_h * u2, mu_h * u2


def feedback_maps(chain: ConversionChain) -> FeedbackMaps:
    return FeedbackMaps(chain)


def pushforward_residuals(chain: ConversionChain, states, step: float = FD_STEP) -> np.ndarray:
    """Pushforward residual at each row of ``states`` (see :func:`pushforward_residual`)."""
    Z = np.atleast_2d(np.asarray(states, dtype=float))
    m, d = Z.shape
    jac = np.empty((m, d, d))
    for j in range(d):
        dz = np.zeros(d)
        dz[j] = step
        jac[:, :, j] = (chain.forward_map_batch(Z + dz) - chain.forward_map_batch(Z - dz)) / (2 * step)
    tau1, tau2 = trailer_fields(chain.n)
    t1 = tau1.evaluate_batch(Z)
    t2 = tau2.evaluate_batch(Z)
    X = chain.forward_map_batch(Z)
    k1 = chain.kr_pair.k1.evaluate_batch(X)
    k2 = chain.kr_pair.k2.evaluate_batch(X)
    fb = chain.feedback_batch(Z)
    nu, eta, mu = fb[:, 0:1], fb[:, 1:2], fb[:, 2:3]
    push1 = np.einsum("mij,mj->mi", jac, t1)
    push2 = np.einsum("mij,mj->mi", jac, t2)
    r1 = np.linalg.norm(push1 - nu * k1, axis=1)
    r2 = np.linalg.norm(push2 - eta * k1 - mu * k2, axis=1)
    return np.maximum(r1, r2)


def pushforward_residual(chain: ConversionChain, zeta, step: float = FD_STEP) -> float:
    """Largest Euclidean mismatch in the two pushforward identities at ``zeta``.

    The Jacobian of the coordinate map is taken by central differences.
    """
    return float(pushforward_residuals(chain, [_state(zeta)], step)[0])


# realising a given word -------------------------------------------------------


def universal_point(word, y: Sequence[float]) -> Configuration:
    """A trailer configuration whose KR image is ``y`` with singular stages where ``word`` has ``S``.

    Only the tag pattern of ``word`` matters; regular constants are absorbed
    into ``y`` (the chain's coordinates are uncentred).
    """
    if isinstance(word, str):
        word = KRWord.parse(word)
    pattern = word.pattern() if isinstance(word, KRWord) else tuple(bool(s) for s in word)
    n = len(pattern)
    y = [float(v) for v in y]
    if len(y) != n + 3:
        raise ValueError(f"target has {len(y)} coordinates, word needs {n + 3}")
    for i, sing in enumerate(pattern):
        if sing and y[i + 3] != 0.0:
            raise DomainError(f"y_{i + 4} = {y[i + 3]} must be zero at a singular coordinate")
    branches = (TAN,) + tuple(SINGULAR if s else REGULAR for s in pattern)
    _, mu, nu, eta = _stage_exprs(branches)
    thetas = [math.atan(y[2])]
    for i in range(1, n + 1):
        state = [y[0], y[1]] + thetas + [0.0] * (n + 1 - len(thetas))
        nu_p, mu_p, eta_p = compile_exprs((nu[i - 1], mu[i - 1], eta[i - 1]), n + 3)(state)
        if pattern[i - 1]:
            thetas.append(thetas[-1] + math.pi / 2)
        else:
            if abs(nu_p) <= PREMISE_TOL:
                raise ConversionError(f"nu_{i - 1} vanishes while placing trailer {i}")
            thetas.append(math.atan((mu_p * y[i + 2] - eta_p) / nu_p) + thetas[-1])
    return Configuration(y[0], y[1], tuple(thetas))


# two-trailer closed form ------------------------------------------------------


@dataclass(frozen=True)
class DomainWindow:
    gamma: float
    delta: float
    k: int = 0

    def contains(self, theta2: float) -> bool:
        return self.gamma < theta2 < self.delta

    @property
    def parity(self) -> int:
        return self.k % 2


def _check_relative(t0: float, t1: float):
    if not (-math.pi / 2 < t0 < math.pi / 2 and -math.pi / 2 < t1 < math.pi / 2):
        raise DomainError(f"relative angles ({t0}, {t1}) must lie in (-pi/2, pi/2)")
    if abs(math.cos(t0)) <= 1e-12 or abs(math.cos(t1)) <= 1e-12:
        raise PoleError("relative angle at a pole")


def window_coefficients(t0: float, t1: float) -> tuple:
    """``(a, b, c)`` with ``x5 = a cos(t2) / (b cos(t2) + c sin(t2))``."""
    _check_relative(t0, t1)
    sec2 = 1.0 / math.cos(t1) ** 2
    a = math.cos(t0) ** 4 * math.cos(t1)
    b = 3.0 * math.tan(t0) * math.tan(t1) * math.sin(t1) - sec2 * math.sin(t1)
    c = sec2
    return a, b, c


def domain_window(t0: float, t1: float, theta2: float | None = None) -> DomainWindow:
    """Consecutive zeros ``gamma < delta`` of ``b cos + c sin``.

    Without ``theta2`` the window with ``gamma`` in (-pi/2, pi/2) is returned;
    otherwise the window bracketing ``theta2`` (as given, not reduced).
    """
    _, b, c = window_coefficients(t0, t1)
    g0 = math.atan2(-b, c)
    if g0 > math.pi / 2:
        g0 -= math.pi
    elif g0 <= -math.pi / 2:
        g0 += math.pi
    if theta2 is None:
        return DomainWindow(g0, g0 + math.pi, 0)
    k = math.floor((theta2 - g0) / math.pi)
    gamma = g0 + k * math.pi
    if not gamma < theta2 < gamma + math.pi:
        raise DomainError(f"theta2 = {theta2} sits on a zero of the window function")
    return DomainWindow(gamma, gamma + math.pi, k)


def window_of(zeta) -> DomainWindow:
    """Window of a two-trailer configuration, with ``theta2 - theta1`` reduced to [-pi, pi]."""
    cfg = zeta if isinstance(zeta, Configuration) else Configuration.from_array(zeta)
    if cfg.n != 2:
        raise ValueError("window_of needs a two-trailer configuration")
    t0, t1, t2 = cfg.relative_angles()
    return domain_window(t0, t1, t2)


def in_domain(zeta, parity: int | None = None) -> bool:
    """Membership of V; with ``parity`` the window index must match modulo 2."""
    try:
        w = window_of(zeta)
    except (DomainError, PoleError):
        return False
    return parity is None or w.parity == parity % 2


def two_trailer_map(zeta, check_domain: bool = True) -> np.ndarray:
    """Closed-form KR coordinates of a two-trailer configuration."""
    cfg = zeta if isinstance(zeta, Configuration) else Configuration.from_array(zeta)
    if cfg.n != 2:
        raise ValueError("two_trailer_map needs a two-trailer configuration")
    if check_domain and not in_domain(cfg):
        raise DomainError(f"configuration {cfg.as_array().tolist()} is outside V")
    xi1, xi2, th0, th1, th2 = cfg.as_array()
    r1, r2 = th1 - th0, th2 - th1
    if abs(math.cos(th0)) <= 1e-12 or abs(math.cos(r1)) <= 1e-12:
        raise PoleError("theta0 or theta1 - theta0 at a pole")
    x3 = math.tan(th0)
    x4 = math.tan(r1) / math.cos(th0) ** 3
    num = math.cos(th0) ** 4 * math.cos(r1) * math.cos(r2)
    den = (3.0 * math.tan(th0) * math.tan(r1) * math.sin(r1) * math.cos(r2)
           + (math.sin(r2) - math.sin(r1) * math.cos(r2)) / math.cos(r1) ** 2)
    if abs(den) <= 1e-12:
        raise DomainError("x5 has a pole here (theta2 - theta1 at a window boundary)")
    return np.array([xi1, xi2, x3, x4, num / den])


def two_trailer_inverse(x: Sequence[float], parity: int = 0) -> Configuration:
    """Preimage in V of KR coordinates ``x`` for the window with the given parity."""
    x1, x2, x3, x4, x5 = (float(v) for v in x)
    t0 = math.atan(x3)
    t1 = math.atan(x4 * math.cos(t0) ** 3)
    a, b, c = window_coefficients(t0, t1)
    w = domain_window(t0, t1)
    # solve x5 (b cos + c sin) = a cos on the window
    base = math.pi / 2 if x5 == 0.0 else math.atan((a / x5 - b) / c)
    cands = [base + j * math.pi for j in range(-2, 4)]
    t2 = next(t for t in cands if w.contains(t))
    if parity % 2:
        t2 += math.pi
    return Configuration(x1, x2, (t0, t0 + t1, t0 + t1 + t2))


@lru_cache(maxsize=None)
def two_trailer_chain() -> ConversionChain:
    """The chain realising the closed form: tan, regular, singular branches.

    Its base point sits on the singular locus ``theta2 - theta1 = pi/2``.
    """
    return build_chain(2, Configuration(0.0, 0.0, (0.0, 0.0, math.pi / 2)))


__all__ = [
    "TAN", "COT", "REGULAR", "SINGULAR", "ConversionChain", "FeedbackMaps", "DomainWindow",
    "build_chain", "branches_for", "feedback_maps", "pushforward_residual", "pushforward_residuals",
    "universal_point", "window_coefficients", "domain_window", "window_of", "in_domain",
    "two_trailer_map", "two_trailer_inverse", "two_trailer_chain", "angle_diff",
]
