import json
import subprocess
import sys

import pytest

from conftest import SCENARIOS
from diracq.cli import main


def run_cli(capsys, *args):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, text, name="s.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_pass_exit_zero_and_text_report(capsys):
    code, out, _ = run_cli(capsys, SCENARIOS / "minimal_moyal.yaml")
    assert code == 0
    assert "PASS  moyal-mc4 [mc4]" in out
    assert out.rstrip().endswith("PASS: 1 passed, 0 failed, 0 errors")


def test_failing_check_exit_one_with_residual(capsys):
    code, out, _ = run_cli(capsys, SCENARIOS / "negative" / "corrupted_tau1.yaml", "--format", "json")
    assert code == 1
    report = json.loads(out)
    (row,) = report["checks"]
    assert row["status"] == "fail"
    assert row["residual"].startswith("E2:")
    assert report["summary"] == {"pass": 0, "fail": 1, "error": 0}


def test_parse_error_exit_two_with_position(capsys):
    code, _, err = run_cli(capsys, SCENARIOS / "negative" / "malformed.yaml")
    assert code == 2
    assert "line 6, column 25" in err


def test_yaml_syntax_and_schema_errors(capsys, tmp_path):
    code, _, err = run_cli(capsys, write(tmp_path, "name: x\nchecks: [\n"))
    assert code == 2
    code, _, err = run_cli(capsys, write(tmp_path, "name: x\nchecks:\n  - {check: nope}\n"))
    assert code == 2 and "nope" in err
    code, _, err = run_cli(capsys, write(tmp_path, "name: x\nchecks:\n  - {check: mc, sigma: missing}\n"))
    assert code == 2 and "missing" in err


def test_invalid_object_exit_two(capsys, tmp_path):
    text = ("name: x\nsigma:\n  bad: {m: 2, terms: {\"1|\": \"h\"}}\n"
            "checks:\n  - {check: mc, sigma: bad}\n")
    code, _, err = run_cli(capsys, write(tmp_path, text))
    assert code == 2 and "total degree 2" in err
    text = ("name: x\nsigma:\n  bad: {m: 2, terms: {\"13|\": \"h\"}}\n"
            "checks:\n  - {check: mc, sigma: bad}\n")
    code, _, err = run_cli(capsys, write(tmp_path, text))
    assert code == 2 and "invalid scenario object" in err


def test_usage_errors(capsys):
    assert run_cli(capsys, "--format", "xml", SCENARIOS / "minimal_moyal.yaml")[0] == 2
    assert run_cli(capsys, SCENARIOS / "minimal_moyal.yaml", "--check", "no-such-check")[0] == 2
    assert run_cli(capsys, SCENARIOS / "does_not_exist.yaml")[0] == 2


def test_check_filter_and_output_file(capsys, tmp_path):
    out_file = tmp_path / "r.json"
    code, _, _ = run_cli(capsys, SCENARIOS / "holonomy.yaml", "--check", "lambda-one", "--check", "holonomy",
                         "--format", "json", "-o", out_file)
    assert code == 0
    report = json.loads(out_file.read_text())
    assert [r["name"] for r in report["checks"]] == ["inner-single-holonomy", "lambda-half", "lambda-one"]


def test_report_schema(capsys):
    code, out, _ = run_cli(capsys, SCENARIOS / "transport.yaml", "--format", "json", "--timing")
    report = json.loads(out)
    assert set(report) == {"scenario", "seed", "hbar_order", "status", "summary", "checks"}
    assert report["scenario"] == "transport" and report["hbar_order"] == 3 and report["seed"] == 0
    for row in report["checks"]:
        assert set(row) == {"name", "check", "status", "residual", "detail", "timing"}
    names = [r["name"] for r in report["checks"]]
    assert names == sorted(names)


def test_hbar_order_override(capsys):
    code, out, _ = run_cli(capsys, SCENARIOS / "minimal_moyal.yaml", "--hbar-order", "3", "--format", "json")
    assert code == 0 and json.loads(out)["hbar_order"] == 3


def test_expect_fail_and_expect_error(capsys, tmp_path):
    text = """name: x
sigma:
  np: {m: 3, terms: {"12|": "h*x3", "13|": "h*x1"}}
  ok: {m: 2, terms: {"12|": "h"}}
tight_family:
  np: {quantize: np}
checks:
  - {name: a, check: mc, sigma: np, expect_fail: true}
  - {name: b, check: mc, sigma: ok, expect_fail: true}
  - {name: c, check: mc4, family: np, expect_error: "not a Maurer-Cartan"}
"""
    code, out, _ = run_cli(capsys, write(tmp_path, text), "--format", "json")
    status = {r["name"]: r["status"] for r in json.loads(out)["checks"]}
    assert status == {"a": "pass", "b": "fail", "c": "pass"}
    assert code == 1


def test_json_deterministic_and_jobs_invariant(capsys):
    path = SCENARIOS / "dirac_brackets.yaml"
    reports = [run_cli(capsys, path, "--format", "json", "--seed", "7", *extra)[1]
               for extra in ([], [], ["--jobs", "3"])]
    assert reports[0] == reports[1] == reports[2]
    other = run_cli(capsys, path, "--format", "json", "--seed", "8")[1]
    assert json.loads(other)["seed"] == 8


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "diracq.cli", str(SCENARIOS / "minimal_moyal.yaml")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "PASS" in proc.stdout
