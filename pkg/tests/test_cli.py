import json
import subprocess
import sys

import pytest

from spnodal.cli import run_cli


def test_check_hypotheses_default(capsys):
    assert run_cli(["check-hypotheses"]) == 0
    out = capsys.readouterr().out
    assert "f4" in out and "V1" in out


def test_check_hypotheses_reports_failure(capsys):
    assert run_cli(["check-hypotheses", "--p", "4"]) == 1
    assert "FAIL" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [[], ["frobnicate"], ["solve-ground", "--bogus"], ["solve-ground", "--n", "ten"], ["sweep-R", "--radii", "a,b"]],
)
def test_usage_errors(argv, capsys):
    assert run_cli(argv) == 2


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = red\n")
    assert run_cli(["check-hypotheses", "--config", str(cfg)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_invalid_values_exit_2(tmp_path, capsys):
    assert run_cli(["solve-ground", "--n", "8", "--out", str(tmp_path)]) == 2
    assert run_cli(["level-inequality", "--R", "8", "--out", str(tmp_path)]) == 2
    assert run_cli(["sweep-R", "--radii", "6,4", "--out", str(tmp_path)]) == 2


def test_solve_ground_writes_outputs(tmp_path, capsys):
    code = run_cli(["solve-ground", "--R", "4", "--n", "128", "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "result.json").read_text())
    assert doc["kind"] == "solve_ground"
    assert doc["result"]["nodal_domains"] == 1
    assert len((tmp_path / "profile.csv").read_text().splitlines()) == 130
    assert "level" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "spnodal", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "solve-nodal" in proc.stdout
