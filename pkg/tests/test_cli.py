import json
import math
import subprocess
import sys

import pytest

from kr_steer.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_nilpotency_of_base_pair(capsys):
    code, out, _ = run(capsys, "nilpotency", "--word", "")
    rep = json.loads(out)
    assert code == 0
    assert rep["dimension"] == 3 and rep["nilindex"] == 2 and rep["nilpotent"]


def test_nilpotency_budget_is_a_math_error(capsys):
    code, _, err = run(capsys, "nilpotency", "--word", "S.S.S", "--max-dim", "4")
    assert code == 1
    assert "error" in json.loads(err)


def test_bad_word_is_invalid_arguments(capsys):
    code, out, err = run(capsys, "nilpotency", "--word", "Q")
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "invalid_arguments"


def test_unknown_flags_and_commands(capsys):
    assert run(capsys, "nilpotency", "--word", "", "--colour")[0] == 2
    assert run(capsys, "fly")[0] == 2
    assert run(capsys)[0] == 2


def test_flag_command(capsys):
    code, out, _ = run(capsys, "flag", "--trailers", "2", "--point", "0,0,0,0,pi/2")
    assert code == 0 and json.loads(out)["dims"] == [2, 3, 4, 5]
    code, out, _ = run(capsys, "flag", "--word", "R(0).S", "--point", "[0.1, 0.2, 0.3, 0.4, 0.5]")
    assert code == 0 and json.loads(out)["dims"] == [2, 3, 4, 5]
    assert run(capsys, "flag", "--word", "S", "--point", "0,0")[0] == 2
    assert run(capsys, "flag", "--word", "S", "--trailers", "1", "--point", "0,0,0,0")[0] == 2


def test_convert_command(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", [0, 0, 0, 0, "pi/2"])
    code, out, _ = run(capsys, "convert", "--n", "2", "--config", cfg)
    rep = json.loads(out)
    assert code == 0
    assert rep["kr_word"] == "R(0).S"
    assert rep["branch_word"] == ["tan", "regular", "singular"]
    assert run(capsys, "convert", "--n", "3", "--config", cfg)[0] == 2
    assert run(capsys, "convert", "--n", "2", "--config", str(tmp_path / "missing.json"))[0] == 2


def test_convert_with_expressions(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"xi1": 0, "xi2": 0, "thetas": [0.3, 0.3]})
    code, out, _ = run(capsys, "convert", "--n", "1", "--config", cfg, "--expressions")
    assert code == 0 and "x_funcs" in json.loads(out)


def scenario(tmp_path, target):
    return write(tmp_path, "s.json", {"n": 2, "zeta0": [0, 0, 0, "-pi/4", 0], "zetaT": target, "steps": 300})


def test_plan_and_simulate(tmp_path, capsys):
    s = scenario(tmp_path, [0, 1, 0, "pi/4", "3*pi/4"])
    plan_path = tmp_path / "plan.json"
    code, out, _ = run(capsys, "plan", "--scenario", s, "--output", str(plan_path))
    assert code == 0
    assert json.loads(out) == json.loads(plan_path.read_text())
    code, out, _ = run(capsys, "simulate", "--plan", str(plan_path), "--steps", "300",
                       "--out-dir", str(tmp_path / "art"), "--name", "run")
    rep = json.loads(out)
    assert code == 0
    assert rep["stayed_in_V"] and rep["steps"] == 300
    assert sorted(p.name for p in (tmp_path / "art").iterdir()) == [
        "run.csv", "run_angles.svg", "run_path.svg", "run_plan.json"]


def test_plan_output_is_deterministic(tmp_path, capsys):
    s = scenario(tmp_path, [0, 1, 0, "pi/4", "3*pi/4"])
    first = run(capsys, "plan", "--scenario", s)[1]
    assert run(capsys, "plan", "--scenario", s)[1] == first


def test_unreachable_target(tmp_path, capsys):
    s = write(tmp_path, "u.json", {"n": 2, "zeta0": [0, 0, 0, 0, "pi/4"],
                                   "zetaT": [0, -1, 0, 0.3, 0.3 + math.pi / 2]})
    code, out, err = run(capsys, "plan", "--scenario", s)
    assert code == 1 and out == ""
    assert json.loads(err)["error"] == "unreachable"


def test_bad_scenarios(tmp_path, capsys):
    assert run(capsys, "plan", "--scenario", write(tmp_path, "e.json", {}))[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(capsys, "plan", "--scenario", str(bad))[0] == 2
    outside = scenario(tmp_path, [0, 1, "pi/2", 0, 0])
    code, _, err = run(capsys, "plan", "--scenario", outside)
    assert code == 1 and json.loads(err)["error"] == "domain"
    other_window = scenario(tmp_path, [0, 1, 0, 0, "-pi/2"])
    code, _, err = run(capsys, "plan", "--scenario", other_window)
    assert code == 1 and json.loads(err)["error"] == "window_mismatch"


def test_simulate_argument_errors(tmp_path, capsys):
    assert run(capsys, "simulate", "--plan", write(tmp_path, "p.json", {"x0": []}))[0] == 2
    assert run(capsys, "simulate", "--plan", "nowhere.json", "--steps", "0")[0] == 2


def test_help_lists_commands(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("convert", "nilpotency", "flag", "plan", "simulate", "reproduce-figures"):
        assert cmd in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kr_steer", "nilpotency", "--word", "R(0)"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["dimension"] == 4
