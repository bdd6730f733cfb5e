"""Command-line interface.

Every command prints JSON on stdout.  Failures print ``{"error": kind,
"message": ...}`` on stderr and exit with 2 for bad arguments or inputs and 1
for mathematical or domain errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import KRSteerError, ScenarioError

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    """Invalid arguments or unreadable inputs (exit status 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def _parse_point(text: str) -> list:
    from .sim_verify import parse_angle

    text = text.strip()
    try:
        raw = json.loads(text) if text.startswith("[") else [s for s in text.split(",") if s.strip()]
    except json.JSONDecodeError as exc:
        raise UsageError(f"bad point {text!r}: {exc}") from None
    try:
        return [parse_angle(v).value for v in raw]
    except ScenarioError as exc:
        raise UsageError(str(exc)) from None


def _configuration(data):
    from .trailer_model import Configuration

    if isinstance(data, dict) and "thetas" in data:
        data = [data.get("xi1", 0), data.get("xi2", 0), *data["thetas"]]
    if not isinstance(data, list) or len(data) < 3:
        raise UsageError("configuration must be a list [xi1, xi2, theta0, ...] or an object with thetas")
    return Configuration.from_array(_parse_point(json.dumps(data)))


# commands -----------------------------------------------------------------------


def cmd_convert(args) -> dict:
    from .conversion import build_chain

    cfg = _configuration(_read_json(args.config))
    if cfg.n != args.n:
        raise UsageError(f"configuration has {cfg.n} trailers but --n is {args.n}")
    return build_chain(args.n, cfg).report(expressions=args.expressions)


def _word(text: str):
    from .kr_forms import KRWord

    try:
        return KRWord.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_nilpotency(args) -> dict:
    from .kr_forms import build_kr
    from .nilpotency import generate_algebra, nilpotency_report

    word = _word(args.word)
    report = nilpotency_report(generate_algebra(build_kr(word), max_dim=args.max_dim))
    return {"word": str(word), **report}


def cmd_flag(args) -> dict:
    from .kr_forms import build_kr, derived_flag_dims
    from .trailer_model import trailer_fields

    point = _parse_point(args.point)
    if args.trailers is not None:
        fields = trailer_fields(args.trailers)
        label = {"trailers": args.trailers}
    else:
        fields = build_kr(_word(args.word)).fields()
        label = {"word": str(_word(args.word))}
    if len(point) != fields[0].dimension:
        raise UsageError(f"point needs {fields[0].dimension} coordinates, got {len(point)}")
    dims = derived_flag_dims(fields, point, tol=args.tol)
    return {**label, "point": point, "dims": dims}


def cmd_plan(args) -> dict:
    from .planner import plan
    from .sim_verify import load_scenario

    try:
        scenario = load_scenario(_read_json(args.scenario))
    except ScenarioError as exc:
        raise UsageError(str(exc)) from None
    p = plan(scenario.start, scenario.target, args.root_choice or scenario.root_choice)
    out = p.to_json()
    if args.output:
        Path(args.output).write_text(_dump(out) + "\n")
    return out


def cmd_simulate(args) -> dict:
    from .planner import SteeringPlan
    from .sim_verify import verify_plan, write_artifacts

    try:
        p = SteeringPlan.from_json(_read_json(args.plan))
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad plan file: {exc}") from None
    report = verify_plan(p, args.steps, allow_exit=True)
    files = write_artifacts(args.name, p, report, Path(args.out_dir))
    return {**report.to_json(), "passed": report.passed(), "files": [str(f) for f in files]}


def cmd_reproduce(args) -> dict:
    from .sim_verify import reproduce_figures

    results = reproduce_figures(args.out_dir)
    summary = {"scenarios": [r.summary() for r in results]}
    summary["all_passed"] = all(s["passed"] and s["terminal_on_singular_locus"] for s in summary["scenarios"])
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kr-steer", description="Kumpera-Ruiz normal forms for the car with n trailers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("convert", help="print the conversion chain report for a configuration")
    p.add_argument("--n", type=int, required=True, help="number of trailers")
    p.add_argument("--config", required=True, help="JSON file: [xi1, xi2, theta0, ...]; angles may be 'pi/2'")
    p.add_argument("--expressions", action="store_true", help="include the symbolic expressions")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("nilpotency", help="close the Lie algebra of a KR word and report nilpotency")
    p.add_argument("--word", required=True, help="dotted word such as 'R(0).S'; '' for the base pair")
    p.add_argument("--max-dim", type=int, default=200, help="closure budget (default 200)")
    p.set_defaults(func=cmd_nilpotency)

    p = sub.add_parser("flag", help="derived-flag dimensions at a point")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--word", help="KR word")
    g.add_argument("--trailers", type=int, help="use the n-trailer fields instead")
    p.add_argument("--point", required=True, help="JSON list or comma-separated coordinates")
    p.add_argument("--tol", type=float, default=1e-8, help="relative rank tolerance (default 1e-8)")
    p.set_defaults(func=cmd_flag)

    p = sub.add_parser("plan", help="plan a two-trailer manoeuvre from a scenario file")
    p.add_argument("--scenario", required=True, help="scenario JSON with n, zeta0, zetaT")
    p.add_argument("--output", help="write the plan JSON here as well")
    p.add_argument("--root-choice", choices=("min_abs", "max_abs"), help="override the scenario's root choice")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="run a plan on the trailer kinematics; write CSV and SVG")
    p.add_argument("--plan", required=True, help="plan JSON written by 'plan'")
    p.add_argument("--steps", type=int, default=10_000, help="RK4 steps (default 10000)")
    p.add_argument("--out-dir", default=".", help="directory for the artifacts")
    p.add_argument("--name", default="trajectory", help="artifact file stem")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce-figures", help="run the two bundled scenarios")
    p.add_argument("--out-dir", default="figures", help="directory for the artifacts (default figures)")
    p.set_defaults(func=cmd_reproduce)
    return parser


def _configure_logging():
    level = os.environ.get("KR_STEER_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "steps", 1) is not None and getattr(args, "steps", 1) < 1:
            raise UsageError("--steps must be positive")
        result = args.func(args)
    except UsageError as exc:
        return _fail("invalid_arguments", str(exc), 2)
    except KRSteerError as exc:
        return _fail(exc.kind, str(exc), 1)
    except (ValueError, ArithmeticError) as exc:
        return _fail("math_error", str(exc), 1)
    sys.stdout.write(_dump(result) + "\n")
    if args.command == "reproduce-figures" and not result["all_passed"]:
        return _fail("endpoint_check_failed", "at least one scenario missed its endpoint check", 1)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
