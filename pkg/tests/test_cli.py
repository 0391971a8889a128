import json
import subprocess
import sys

import pytest

from matweight.cli import main


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def report(tmp_path):
    return json.loads((tmp_path / "report.json").read_text())


def test_characteristic_constant(tmp_path):
    assert run(tmp_path, "characteristic", "--family", "constant", "--kind", "ap", "--p", "2", "--grid", "64") == 0
    rep = report(tmp_path)
    assert rep["command"] == "characteristic" and rep["passed"]
    assert abs(rep["estimate"]["value"] - 1) < 1e-12


@pytest.mark.parametrize("gamma,expect", [(0.25, "finite"), (0.75, "diverging")])
def test_characteristic_remark_verdicts(tmp_path, gamma, expect):
    code = run(tmp_path, "characteristic", "--family", "remark-5.2", "--gamma", str(gamma),
               "--p", "2", "--grid", "256", "--expect", expect)
    assert code == 0
    assert report(tmp_path)["estimate"]["verdict"] == expect
    wrong = "finite" if expect == "diverging" else "diverging"
    assert run(tmp_path, "characteristic", "--family", "remark-5.2", "--gamma", str(gamma),
               "--p", "2", "--grid", "256", "--expect", wrong) == 2


def test_config_errors_exit_3(tmp_path, capsys):
    assert run(tmp_path, "characteristic", "--family", "no-such-family", "--p", "2") == 3
    assert "registered:" in capsys.readouterr().err
    assert run(tmp_path, "verify-example", "no-such-example") == 3
    err = capsys.readouterr().err
    assert "plap-harmonic" in err and "ball-map" in err
    assert run(tmp_path, "characteristic", "--family", "constant", "--kind", "ap") == 3
    bad = tmp_path / "bad.json"
    bad.write_text('{"p": 2,\n  "kind": }')
    assert run(tmp_path, "characteristic", "--config", str(bad)) == 3
    assert "line 2, column" in capsys.readouterr().err
    assert run(tmp_path, "solve", "--family", "constant", "--p", "2", "--boundary", "x + q") == 3


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"family": "constant", "kind": "ap", "p": 3.0, "grid": 32}))
    assert run(tmp_path, "characteristic", "--config", str(cfg), "--p", "2") == 0
    assert report(tmp_path)["estimate"]["exponents"]["p"] == 2.0


def test_report_deterministic_apart_from_timestamp(tmp_path):
    args = ("balance", "--family", "example-7-balance-failure", "--p", "1.5", "--q", "2", "--grid", "128")
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        assert run(d, *args) == 0  # the pair fails balance, but no --expect means the scan itself passes
        rep = report(d)
        rep.pop("timestamp")
        outs.append(rep)
        assert (d / "traces" / "worst_ball.csv").exists()
    assert outs[0] == outs[1]


def test_balance_expectation(tmp_path):
    args = ("balance", "--family", "example-7-balance-failure", "--p", "1.5", "--q", "2", "--grid", "128")
    assert run(tmp_path, *args, "--expect", "fails") == 0
    assert run(tmp_path, *args, "--expect", "holds") == 2


def test_solve_and_maximal_write_rasters(tmp_path):
    assert run(tmp_path, "solve", "--family", "constant", "--p", "3", "--boundary", "x + 2*y", "--grid", "32") == 0
    assert (tmp_path / "traces" / "energy.csv").exists()
    assert report(tmp_path)["solve"]["converged"]
    d = tmp_path / "m"
    assert run(d, "maximal", "--family", "ball-map", "--grid", "64") == 0
    assert any(d.rglob("*continuity_mask*"))


def test_mfd_exit_reflects_hypotheses(tmp_path):
    assert run(tmp_path, "mfd", "--family", "identity-map", "--grid", "64") == 0
    assert report(tmp_path)["hypotheses_hold"]
    assert run(tmp_path, "mfd", "--family", "constant", "--grid", "32") == 3


@pytest.mark.parametrize("name,grid", [("plap-harmonic", 128), ("example-7-balance-failure", 512)])
def test_verify_examples_pass(tmp_path, name, grid):
    assert run(tmp_path, "verify-example", name, "--grid", str(grid)) == 0
    rep = report(tmp_path)
    assert rep["example"] == name and all(c["passed"] for c in rep["checks"])


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "matweight.cli", "verify-example", "nope", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 3
