"""Closed-loop verification of steering plans and the bundled scenarios.

The trailer kinematics are integrated with fixed-step RK4 under the planned
KR controls mapped through the inverse feedback, evaluated along the evolving
state.  The KR system is integrated separately under the same open-loop
controls so that both routes can be compared along the way.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .conversion import two_trailer_chain, window_of
from .errors import DomainError, IntegrationError, PoleError, ScenarioError
from .kr_forms import KRPair, build_kr
from .planner import ROOT_CHOICES, SteeringPlan, TWO_TRAILER_WORD, plan
from .trailer_model import Configuration, angle_diff, normalize_angles, trailer_rhs

log = logging.getLogger(__name__)

DEFAULT_STEPS = 10_000
ENDPOINT_TOL = 1e-6
CONSISTENCY_TOL = 5e-6


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    v: np.ndarray = field(repr=False)
    u: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.states.shape[1] - 3

    @property
    def final(self) -> Configuration:
        return Configuration.from_array(self.states[-1])

    def configuration(self, k: int) -> Configuration:
        return Configuration.from_array(self.states[k])

    def csv_text(self) -> str:
        """Header ``t,xi1,xi2,theta0,...,thetaN,v1,v2,u1,u2`` then one row per sample."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["t", "xi1", "xi2"] + [f"theta{i}" for i in range(self.n + 1)] + ["v1", "v2", "u1", "u2"]
        w.writerow(header)
        u = self.u if self.u is not None else np.full((len(self.times), 2), np.nan)
        for t, s, v, uu in zip(self.times, self.states, self.v, u):
            w.writerow([repr(float(x)) for x in (t, *s, *v, *uu)])
        return buf.getvalue()


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(n: int, zeta0, controls: Callable, T: float = 1.0, steps: int = DEFAULT_STEPS,
              monitor: Callable | None = None) -> Trajectory:
    """Fixed-step RK4 for the n-trailer system.

    ``controls(t, state)`` returns ``(v1, v2)``.  Angles are brought back to
    (-pi, pi] after every step.  ``monitor(t, state)`` is called at each grid
    point and may raise to stop the integration.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if T <= 0:
        raise ValueError("T must be positive")
    y = (zeta0.as_array() if isinstance(zeta0, Configuration) else np.asarray(zeta0, dtype=float)).copy()
    if len(y) != n + 3:
        raise ValueError(f"initial state has {len(y)} entries, expected {n + 3}")
    h = T / steps

    def rhs(t, state):
        v1, v2 = controls(t, state)
        if not (math.isfinite(v1) and math.isfinite(v2)):
            raise IntegrationError(f"non-finite controls at t = {t:.6g}")
        return trailer_rhs(n, state, v1, v2)

    times = np.linspace(0.0, T, steps + 1)
    states = np.empty((steps + 1, n + 3))
    vs = np.empty((steps + 1, 2))
    states[0] = y
    for k in range(steps + 1):
        t = times[k]
        if monitor is not None:
            monitor(t, y)
        try:
            vs[k] = controls(t, y)
        except PoleError as exc:
            raise IntegrationError(f"controls undefined at t = {t:.6g}: {exc}") from None
        if k == steps:
            break
        try:
            y = _rk4_step(rhs, t, y, h)
        except PoleError as exc:
            raise IntegrationError(f"controls undefined inside step at t = {t:.6g}: {exc}") from None
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at t = {times[k + 1]:.6g}")
        y[2:] = normalize_angles(y[2:])
        states[k + 1] = y
    return Trajectory(times, states, vs)


def integrate_kr(pair: KRPair, x0: Sequence[float], controls: Callable, T: float = 1.0,
                 steps: int = DEFAULT_STEPS) -> np.ndarray:
    """RK4 for ``x' = k1 u1(t) + k2 u2(t)``; returns the states on the time grid."""
    f1, f2 = pair.k1.to_exprs().compiled, pair.k2.to_exprs().compiled
    h = T / steps

    def rhs(t, x):
        u1, u2 = controls(t)
        return np.asarray(f1(x)) * u1 + np.asarray(f2(x)) * u2

    out = np.empty((steps + 1, pair.dimension))
    x = np.asarray(x0, dtype=float)
    out[0] = x
    for k in range(steps):
        x = _rk4_step(rhs, k * h, x, h)
        out[k + 1] = x
    return out


def trailer_error(a: Configuration, b: Configuration) -> float:
    """Max-norm distance with angles compared modulo 2 pi."""
    pos = max(abs(a.xi1 - b.xi1), abs(a.xi2 - b.xi2))
    ang = max(abs(angle_diff(s, t)) for s, t in zip(a.thetas, b.thetas))
    return max(pos, ang)


@dataclass(frozen=True)
class VerificationReport:
    trailer_error: float
    kr_error: float
    kr_consistency: float
    stayed_in_V: bool
    first_exit_time: float | None
    steps: int
    trajectory: Trajectory = field(repr=False)

    def passed(self, tol: float = ENDPOINT_TOL) -> bool:
        return self.stayed_in_V and self.trailer_error < tol

    def to_json(self) -> dict:
        return {
            "trailer_error": self.trailer_error,
            "kr_error": self.kr_error,
            "kr_consistency": self.kr_consistency,
            "stayed_in_V": self.stayed_in_V,
            "first_exit_time": self.first_exit_time,
            "steps": self.steps,
        }


def verify_plan(plan_: SteeringPlan, steps: int = DEFAULT_STEPS, allow_exit: bool = False) -> VerificationReport:
    """Run the plan on the trailer kinematics and measure the endpoint errors.

    Leaving V raises :class:`DomainError` unless ``allow_exit`` is set, in
    which case the first exit time is reported.
    """
    chain = two_trailer_chain()
    exits: list = []

    def monitor(t, state):
        ok = True
        try:
            ok = window_of(state).parity == plan_.window_parity
        except (DomainError, PoleError):
            ok = False
        if not ok and not exits:
            exits.append(t)
            if not allow_exit:
                raise DomainError(f"trajectory leaves V at t = {t:.6g}")

    traj = integrate(2, plan_.zeta0, plan_.trailer_controls, plan_.horizon, steps, monitor)
    u = np.array([plan_.kr_controls(t) for t in traj.times])
    traj = Trajectory(traj.times, traj.states, traj.v, u)
    final = traj.final
    x_final = chain.forward_map(final)
    kr_err = float(np.max(np.abs(x_final - np.asarray(plan_.xT))))
    kr_path = integrate_kr(build_kr(TWO_TRAILER_WORD), plan_.x0, plan_.kr_controls, plan_.horizon, steps)
    mapped = chain.forward_map_batch(traj.states)
    consistency = float(np.max(np.abs(mapped - kr_path)))
    return VerificationReport(
        trailer_error(final, plan_.zetaT), kr_err, consistency,
        not exits, exits[0] if exits else None, steps, traj,
    )


def observed_order(plan_: SteeringPlan, steps: int = 500) -> float:
    """``log2`` of successive endpoint differences under step doubling."""
    ends = [integrate(2, plan_.zeta0, plan_.trailer_controls, plan_.horizon, s).states[-1]
            for s in (steps, 2 * steps, 4 * steps)]
    d1 = _state_gap(ends[0], ends[1])
    d2 = _state_gap(ends[1], ends[2])
    return math.log2(d1 / d2)


def _state_gap(a, b) -> float:
    return trailer_error(Configuration.from_array(a), Configuration.from_array(b))


# scenarios --------------------------------------------------------------------------

_ANGLE = re.compile(r"^\s*([-+]?)\s*(\d+(?:/\d+)?)?\s*\*?\s*pi\s*(?:/\s*(\d+))?\s*$")


@dataclass(frozen=True)
class Angle:
    """A scenario angle; ``pi_multiple`` is kept when written as a rational multiple of pi."""

    value: float
    pi_multiple: Fraction | None = None


def parse_angle(v) -> Angle:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return Angle(float(v), Fraction(0) if v == 0 else None)
    if not isinstance(v, str):
        raise ScenarioError(f"angle {v!r} must be a number or a string such as '3*pi/4'")
    m = _ANGLE.match(v)
    if m is None:
        try:
            return parse_angle(float(v))
        except ValueError:
            raise ScenarioError(f"cannot parse angle {v!r}") from None
    sign, coeff, den = m.groups()
    mult = Fraction(coeff or 1) / Fraction(den or 1)
    if sign == "-":
        mult = -mult
    return Angle(float(mult) * math.pi, mult)


@dataclass(frozen=True)
class Scenario:
    name: str
    n: int
    zeta0: tuple  # (xi1, xi2, Angle, ...)
    zetaT: tuple
    steps: int = DEFAULT_STEPS
    root_choice: str = "min_abs"

    @staticmethod
    def _config(entries) -> Configuration:
        return Configuration(float(entries[0]), float(entries[1]), tuple(a.value for a in entries[2:]))

    @property
    def start(self) -> Configuration:
        return self._config(self.zeta0)

    @property
    def target(self) -> Configuration:
        return self._config(self.zetaT)

    def terminal_on_singular_locus(self) -> bool:
        """Exact check that ``thetaN - theta_{N-1}`` is an odd multiple of pi/2."""
        a, b = self.zetaT[-1].pi_multiple, self.zetaT[-2].pi_multiple
        if a is None or b is None:
            return False
        diff = a - b
        return (diff - Fraction(1, 2)) % 1 == 0


REQUIRED = ("n", "zeta0", "zetaT")


def load_scenario(data, name: str | None = None) -> Scenario:
    """Validate a scenario mapping (or JSON text); missing fields are listed together."""
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    missing = [k for k in REQUIRED if k not in data]
    if missing:
        raise ScenarioError(f"scenario is missing required fields: {', '.join(missing)}")
    n = data["n"]
    if n != 2:
        raise ScenarioError(f"only two-trailer scenarios can be planned (got n = {n})")
    zs = []
    for key in ("zeta0", "zetaT"):
        z = data[key]
        if not isinstance(z, list) or len(z) != n + 3:
            raise ScenarioError(f"{key} must list {n + 3} numbers")
        zs.append(tuple([float(z[0]), float(z[1])] + [parse_angle(a) for a in z[2:]]))
    steps = data.get("steps", DEFAULT_STEPS)
    if not isinstance(steps, int) or steps < 1:
        raise ScenarioError("steps must be a positive integer")
    choice = data.get("root_choice", "min_abs")
    if choice not in ROOT_CHOICES:
        raise ScenarioError(f"root_choice must be one of {ROOT_CHOICES}")
    return Scenario(name or data.get("name", "scenario"), n, zs[0], zs[1], steps, choice)


BUNDLED = ("fig1", "fig2")


def bundled_scenario(name: str) -> Scenario:
    if name not in BUNDLED:
        raise ScenarioError(f"unknown bundled scenario {name!r}; choose from {BUNDLED}")
    text = resources.files("kr_steer.scenarios").joinpath(f"{name}.json").read_text()
    return load_scenario(text, name)


@dataclass(frozen=True)
class ScenarioResult:
    scenario: Scenario
    plan: SteeringPlan
    report: VerificationReport
    files: tuple = ()

    def summary(self) -> dict:
        return {
            "scenario": self.scenario.name,
            "terminal_on_singular_locus": self.scenario.terminal_on_singular_locus(),
            "passed": self.report.passed(),
            **self.report.to_json(),
            "final_state": self.report.trajectory.final.as_array().tolist(),
            "files": [str(p) for p in self.files],
        }


def run_scenario(spec, out_dir: str | Path | None = None) -> ScenarioResult:
    """Plan, verify and (with ``out_dir``) write the CSV, plan JSON and SVG plots."""
    scenario = spec if isinstance(spec, Scenario) else load_scenario(spec)
    p = plan(scenario.start, scenario.target, scenario.root_choice)
    report = verify_plan(p, scenario.steps)
    log.info("scenario %s: trailer error %.3g", scenario.name, report.trailer_error)
    files = ()
    if out_dir is not None:
        files = write_artifacts(scenario.name, p, report, Path(out_dir))
    return ScenarioResult(scenario, p, report, files)


def write_artifacts(name: str, plan_: SteeringPlan, report: VerificationReport, out_dir: Path) -> tuple:
    from .plots import angle_plot, path_plot

    out_dir.mkdir(parents=True, exist_ok=True)
    traj = report.trajectory
    paths = {
        "csv": out_dir / f"{name}.csv",
        "plan": out_dir / f"{name}_plan.json",
        "path": out_dir / f"{name}_path.svg",
        "angles": out_dir / f"{name}_angles.svg",
    }
    paths["csv"].write_text(traj.csv_text())
    paths["plan"].write_text(plan_.dumps() + "\n")
    path_plot(traj, paths["path"], title=f"{name}: last trailer")
    angle_plot(traj, paths["angles"], title=f"{name}: axle angles")
    return tuple(paths.values())


def reproduce_figures(out_dir: str | Path | None = None) -> list:
    return [run_scenario(bundled_scenario(name), out_dir) for name in BUNDLED]


__all__ = [
    "Trajectory", "VerificationReport", "Scenario", "ScenarioResult", "Angle", "integrate",
    "integrate_kr", "verify_plan", "observed_order", "trailer_error", "parse_angle",
    "load_scenario", "bundled_scenario", "run_scenario", "reproduce_figures", "write_artifacts",
]
