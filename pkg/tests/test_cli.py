import json

import numpy as np
import pytest

from asdvar.cli import dumps, exit_code, load_json, run
from asdvar.stationary import SolveReport

QUAD = {"kind": "basic", "phi": {"kind": "quadratic", "Q": [[1.0, 0.0], [0.0, 2.0]]}}


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_demo_matinv(tmp_path, capsys):
    out = tmp_path / "m"
    assert run(["demo", "matinv", "--n", "10", "--seed", "7", "--out", str(out)]) == 0
    rep = load_json(str(out / "matinv.json"))
    assert rep["certificate"]["certified"]
    assert rep["gap"] <= 1e-8
    assert rep["check_results"]["direct_error"] <= 1e-6
    # certificate triple on stdout
    assert "matinv: gap=" in capsys.readouterr().out


def test_asd_check_basic_quadratic(tmp_path):
    cfg = _write(tmp_path, "L.json", QUAD)
    out = tmp_path / "r.json"
    assert run(["asd-check", "--lagrangian", cfg, "--samples", "100", "--out", str(out)]) == 0
    rep = load_json(str(out))
    assert rep["residual"] <= 1e-10 and rep["passed"]


def test_malformed_config_exit_1(tmp_path):
    bad = _write(tmp_path, "bad.json", {"kind": "linear", "A": [[2.0]], "y": [1.0], "colour": 3})
    out = tmp_path / "never.json"
    assert run(["solve-stationary", "--config", bad, "--out", str(out)]) == 1
    assert not out.exists()
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert run(["solve-stationary", "--config", str(broken)]) == 1
    assert run(["demo", "nonsense"]) == 1
    assert run(["frobnicate"]) == 1


def test_conjugate_power(tmp_path):
    fn = _write(tmp_path, "f.json", {"kind": "power", "p": 4.0, "dim": 1})
    out = tmp_path / "c.json"
    assert run(["conjugate", "--fn", fn, "--at", "1", "--out", str(out)]) == 0
    assert load_json(str(out))["value"] == pytest.approx(0.75)
    assert run(["conjugate", "--fn", fn, "--at", "1,2"]) == 1


def test_solve_stationary_linear(tmp_path):
    A = [[2.0, 1.0], [-1.0, 3.0]]
    cfg = _write(tmp_path, "p.json", {"kind": "linear", "A": A, "y": [1.0, 2.0]})
    out = tmp_path / "r.json"
    assert run(["solve-stationary", "--config", cfg, "--out", str(out)]) == 0
    x = np.array(load_json(str(out))["minimizer"])
    assert np.allclose(x, np.linalg.solve(A, [1.0, 2.0]), atol=1e-8)


def test_non_skew_lambda_fails(tmp_path, capsys):
    cfg = _write(tmp_path, "u.json", {"kind": "asd", "lagrangian": QUAD, "Lambda": [[1.0, 0.0], [0.0, 1.0]]})
    assert run(["solve-stationary", "--config", cfg]) == 3
    assert "skew" in capsys.readouterr().err


def test_exit_code_ladder():
    ok = SolveReport(np.zeros(1), 0.0, 0.0, 1, True, True)
    loose = SolveReport(np.zeros(1), 0.1, 0.1, 1, True, False)
    stuck = SolveReport(np.zeros(1), 0.1, 0.1, 1, False, False)
    assert exit_code([ok]) == 0
    assert exit_code([ok, loose]) == 2
    assert exit_code([loose, stuck]) == 3


def test_solve_flow_csv(tmp_path):
    cfg = _write(tmp_path, "f.json", {"kind": "semiconvex_flow", "phi": {"kind": "quadratic", "Q": [[1.0]]},
                                        "u0": [1.0], "T": 1.0, "N": 4})
    csv = tmp_path / "p.csv"
    out = tmp_path / "r.json"
    assert run(["solve-flow", "--config", cfg, "--out", str(out), "--csv", str(csv)]) == 0
    lines = csv.read_text().splitlines()
    assert len(lines) == 6 and lines[0] == "t,x0"
    assert float(lines[-1].split(",")[1]) == pytest.approx(np.exp(-1.0), abs=3 * 0.25)


def test_report_round_trip(tmp_path):
    cfg = _write(tmp_path, "p.json", {"kind": "linear", "A": [[3.0]], "y": [1.0]})
    out = tmp_path / "r.json"
    run(["solve-stationary", "--config", cfg, "--out", str(out)])
    assert dumps(load_json(str(out))) + "\n" == out.read_text()


def test_dumps_17_digits():
    s = dumps({"b": 0.1, "a": 1.0, "c": float("inf")})
    assert s.index('"a"') < s.index('"b"')
    assert "0.10000000000000001" in s and "Infinity" in s
    assert json.loads(s)["b"] == 0.1


def test_demo_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["demo", "random-flow", "--seed", "3", "--steps", "20", "--out", str(d)]) == 0
    for name in ("random-flow.json", "random-flow.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
