import json
import subprocess
import sys
from pathlib import Path

import pytest

from dcsym.cli import main

SAMPLES = Path(__file__).resolve().parent.parent / "samples"
HEAT = str(SAMPLES / "heat.case")
BURGERS = str(SAMPLES / "burgers.case")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_case_letters(capsys):
    code, out, _ = run(capsys, "verify-case", "--table", "3", "--case", "15", "--json")
    rows = [json.loads(line) for line in out.splitlines()]
    assert code == 0
    assert [r["id"] for r in rows] == ["3.15a", "3.15b", "3.15c"]
    assert all(r["verdict"] == "Pass" for r in rows)


def test_verify_case_override(capsys):
    code, out, _ = run(capsys, "verify-case", "--table", "1", "--case", "2a", "--set", "p=1")
    assert code == 0 and "1.2a: Pass" in out


def test_constraint_violation_is_usage_error(capsys):
    code, _, err = run(capsys, "verify-case", "--id", "3.14e", "--set", "mu=-4/3")
    assert code == 2 and "constraint" in err


def test_failing_override(capsys):
    code, out, _ = run(capsys, "verify-case", "--id", "3.16", "--set", "B=u^2")
    assert code == 1 and "residual" in out


@pytest.mark.parametrize("field, code", [
    ("2*t*d_t + x*d_x", 0),
    ("x*d_t", 1),
])
def test_check_heat(capsys, field, code):
    got, out, _ = run(capsys, "check", HEAT, field, "--json")
    obj = json.loads(out)
    assert got == code
    if code:
        assert obj["residual"] == "2*u_xxx"


def test_check_burgers_projective(capsys):
    code, _, _ = run(capsys, "check", BURGERS, "t^2*d_t + t*x*d_x - (t*u + x)*d_u")
    assert code == 0


def test_determining(capsys):
    code, out, _ = run(capsys, "determining", BURGERS, "--ansatz", "reduced", "--json")
    obj = json.loads(out)
    assert code == 0 and obj["ansatz"] == "reduced" and obj["equations"]


def test_transform_files(capsys):
    code, out, _ = run(capsys, "transform", str(SAMPLES / "galilean.map"), BURGERS, "--json")
    obj = json.loads(out)
    assert code == 0 and obj["in_class"]
    code, _, err = run(capsys, "transform", str(SAMPLES / "non_projectible.map"), BURGERS)
    assert code == 2 and "depends on u" in err


def test_transform_catalog(capsys):
    code, out, _ = run(capsys, "transform", "--id", "T2.8", "--json")
    assert code == 0 and json.loads(out)["verdict"] == "Pass"
    code, out, _ = run(capsys, "transform", "--id", "W2.3")
    assert code == 0 and "NotCovered" in out


def test_bracket(capsys):
    code, out, _ = run(capsys, "bracket", "--id", "3.16")
    assert code == 0 and "[Q1, Q5] = Q4" in out
    code, out, _ = run(capsys, "bracket", "--fields", "d_t", "t^2*d_t")
    assert code == 0 and "(2*t)*d_t" in out


def test_gauge(capsys):
    code, out, _ = run(capsys, "gauge", "--id", "2'.2")
    assert code == 0 and "g=h Pass" in out
    code, _, _ = run(capsys, "gauge", "--equation", HEAT, "--gauge", "g=h")
    assert code == 0


def test_list(capsys):
    code, out, _ = run(capsys, "list", "--filter", "dim>=5")
    assert code == 0
    assert {line.split("\t")[0] for line in out.splitlines()} >= {"3.16", "3'.16"}


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["verify-case"],
    ["verify-case", "--id", "9.9"],
    ["verify-case", "--id", "3.16", "--set", "oops"],
    ["check", "missing.case", "d_t"],
])
def test_usage_errors(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_verify_all_subprocess():
    proc = subprocess.run([sys.executable, "-m", "dcsym", "verify-all", "--filter", "table=1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    rows = [json.loads(line) for line in proc.stdout.splitlines()]
    assert rows and all(r["verdict"] == "Pass" for r in rows)
    assert json.loads(proc.stderr.splitlines()[-1])["summary"]["Pass"] == len(rows)
