import csv
import json
import math

import numpy as np
import pytest

from spnodal.harness import (
    FORMAT_VERSION,
    SWEEP_HEADER,
    ConfigError,
    LevelReport,
    SweepRow,
    check_sweep,
    format_config,
    level_inequality,
    load_config,
    parse_config_text,
    read_result,
    scaled_config,
    sweep_R,
    verify_lemmas,
    write_results,
)
from spnodal.solver import SolverConfig, solve_nodal

SMALL = SolverConfig(R_support=4.0, n=128)


@pytest.fixture(scope="module")
def small_nodal():
    return solve_nodal(SMALL)


# -- config ----------------------------------------------------------------


def test_parse_config_types_and_comments():
    vals = parse_config_text("R_support = 6  # radius\n\nn = 256\npotential = constant\ntol_residual = 1e-7\n")
    assert vals == {"R_support": 6.0, "n": 256, "potential": "constant", "tol_residual": 1e-7}


@pytest.mark.parametrize(
    "text",
    ["colour = red\n", "n = 128\nn = 256\n", "n = 12.5\n", "R_support\n", "p = five\n"],
)
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_load_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("R_support = 6\nn = 192\nseed = 4\n")
    cfg = load_config(path, n=384, p=None)
    assert (cfg.R_support, cfg.n, cfg.seed, cfg.p) == (6.0, 384, 4, 5.0)
    assert cfg.node_guess == pytest.approx(3.0)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_load_config_invalid_value():
    with pytest.raises(ConfigError):
        load_config(None, n=4)


def test_format_config_round_trip():
    cfg = SolverConfig(R_support=6.0, n=192, seed=2)
    again = load_config(None, **parse_config_text(format_config(cfg)))
    assert again.to_dict() == cfg.to_dict()


def test_scaled_config_keeps_spacing():
    cfg = scaled_config(SMALL, 12.0)
    assert cfg.R_support / cfg.n == SMALL.R_support / SMALL.n
    assert cfg.node_guess == pytest.approx(6.0)
    with pytest.raises(ValueError):
        scaled_config(SMALL, 4.01)


# -- sweeps ------------------------------------------------------------------


def test_single_radius_sweep_equals_direct_solve(small_nodal):
    (row,) = sweep_R(SMALL, [4.0])
    assert row.ok
    assert row.c_R == small_nodal.level
    assert row.node_radius == small_nodal.node_radii[0]


def test_duplicate_radii_give_identical_rows():
    a, b = sweep_R(SMALL, [4.0, 4.0])
    assert a == b


@pytest.mark.parametrize("radii", [[], [6.0, 4.0], [2.0, 4.0]])
def test_sweep_rejects_bad_radii(radii):
    with pytest.raises(ValueError):
        sweep_R(SMALL, radii)


def test_check_sweep_flags():
    rows = [SweepRow(R, c, 0.0, 2, 1.0, 1) for R, c in [(4, 10.0), (6, 9.0), (8, 8.5), (12, 8.4)]]
    out = check_sweep(rows)
    assert out["all_ok"] and out["non_increasing"] and out["gaps_shrinking"]
    rows[2] = SweepRow(8, 10.0, 0.0, 2, 1.0, 1)
    out = check_sweep(rows)
    assert not out["non_increasing"]
    rows[1] = SweepRow(6, math.nan, math.nan, 0, math.nan, 0, "boom")
    assert not check_sweep(rows)["all_ok"]


def test_level_inequality_needs_large_radius():
    with pytest.raises(ValueError):
        level_inequality(SMALL, R_large=8.0)


# -- lemma checks ------------------------------------------------------------


def test_verify_lemmas_all_pass():
    checks = verify_lemmas(SolverConfig(R_support=4.0, n=64), samples=3)
    assert checks
    failed = [(name, detail) for name, ok, detail in checks if not ok]
    assert not failed


# -- output files --------------------------------------------------------------


def test_write_results_nodal_round_trip(tmp_path, small_nodal):
    paths = write_results(small_nodal, tmp_path, SMALL, kind="solve_nodal")
    assert [p.name for p in paths] == ["result.json", "profile.csv"]
    doc = read_result(tmp_path / "result.json")
    assert doc["format_version"] == FORMAT_VERSION
    assert doc["kind"] == "solve_nodal"
    assert doc["config"]["n"] == SMALL.n
    assert doc["result"]["level"] == small_nodal.level
    assert doc["result"]["nodal_domains"] == 2
    with open(tmp_path / "profile.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "u", "phi"]
    assert len(rows) == SMALL.n + 2
    r = np.array([float(x[0]) for x in rows[1:]])
    np.testing.assert_allclose(np.diff(r), SMALL.R_support / SMALL.n, rtol=1e-12)


def test_write_results_sweep_csv(tmp_path):
    rows = [SweepRow(4.0, 42.9, 1e-7, 2, 0.08, 100), SweepRow(6.0, 42.8, 2e-7, 2, 0.08, 90)]
    write_results(rows, tmp_path, SMALL)
    with open(tmp_path / "sweep.csv", newline="") as fh:
        table = list(csv.reader(fh))
    assert tuple(table[0]) == SWEEP_HEADER
    assert float(table[2][1]) == 42.8
    doc = json.loads((tmp_path / "result.json").read_text())
    assert len(doc["result"]) == 2


def test_write_results_level_report(tmp_path):
    rep = LevelReport(42.9, 9.4, 9.9, -23.6, False, 9.9e-3, 16.0)
    paths = write_results(rep, tmp_path)
    assert [p.name for p in paths] == ["result.json"]
    doc = read_result(paths[0])
    assert doc["result"]["strict"] is False
    assert doc["result"]["decay_delta"] is None


def test_write_results_unwritable(tmp_path, small_nodal):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        write_results(small_nodal, blocker / "sub")
