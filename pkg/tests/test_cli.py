import json
import math
from pathlib import Path

import pytest

from capgeo.cli import build_parser, main

METRICS = Path(__file__).resolve().parents[1] / "metrics"


def run(tmp_path, *argv):
    code = main([*argv, "--out", str(tmp_path)])
    return code


def summary(tmp_path, cmd):
    return json.loads((tmp_path / f"{cmd}.json").read_text())


def test_audit_flat(tmp_path):
    assert run(tmp_path, "audit") == 0
    doc = summary(tmp_path, "audit")
    assert doc["result"]["gauss_bonnet"]["residual"] < 1e-8
    assert doc["anchor"]


def test_audit_sharpness_profile(tmp_path):
    assert run(tmp_path, "audit", "--metric", str(METRICS / "sharpness.toml")) == 0
    prof = summary(tmp_path, "audit")["result"]["profile"]
    assert prof["min_dr"] > 0 and prof["max_d2r"] <= 1e-9


def test_shoot_and_plot(tmp_path):
    assert run(tmp_path, "shoot", "--p", "0.5", "--alpha", str(math.pi / 2), "--plot") == 0
    res = summary(tmp_path, "shoot")["result"]
    assert res["hit"] == "BoundaryHit"
    assert res["length"] == pytest.approx(2.0, abs=1e-6)
    assert (tmp_path / "trajectory.csv").exists() and (tmp_path / "shoot.svg").exists()


def test_flow_random_curve(tmp_path):
    assert run(tmp_path, "flow", "--seed", "3", "--metric", str(METRICS / "bump.toml")) == 0
    res = summary(tmp_path, "flow")["result"]
    assert res["converged"] and res["monotone"]
    assert (tmp_path / "flow_trace.csv").read_text().startswith("time,length")


def test_find_flat(tmp_path):
    assert run(tmp_path, "find", "--theta", str(math.pi / 3), "--grid", "16") == 0
    res = summary(tmp_path, "find")["result"]
    assert (res["index"], res["nullity"]) == (1, 1)
    assert res["theta"] == "1.047197551"
    assert res["status"] == "S1Family"


def test_sharpness(tmp_path):
    assert run(tmp_path, "sharpness", "--k", str(math.pi / 2)) == 0
    res = summary(tmp_path, "sharpness")["result"]
    assert res["lasso_angle"] == "0.7853981634"
    assert res["all_shots_self_intersect"]


def test_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "find", "--theta", "2.0") == 1
    assert run(tmp_path, "find", "--theta", "1.0", "--grid", "4") == 1
    assert run(tmp_path, "audit", "--metric", str(tmp_path / "missing.toml")) == 1
    assert run(tmp_path, "bogus") == 1
    assert run(tmp_path, "shoot", "--alpha", "0") == 2
    loop = tmp_path / "loop.csv"
    loop.write_text("x,y\n1,0\n-0.5,0.1\n0,-0.3\n0,0.4\n0,1\n")
    assert run(tmp_path, "flow", "--curve", str(loop)) == 3
    err = capsys.readouterr().err
    assert "config error" in err and "numerical failure" in err


@pytest.mark.parametrize("argv", [("flow", "--seed", "7"), ("find", "--theta", "0.8", "--grid", "16")])
def test_repeat_runs_are_byte_identical(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([*argv, "--out", str(a)]) == 0
    assert main([*argv, "--out", str(b)]) == 0
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes(), f.name


def test_parser_lists_every_command():
    text = build_parser().format_help()
    for cmd in ("audit", "flow", "shoot", "find", "lassos", "width", "sharpness"):
        assert cmd in text
