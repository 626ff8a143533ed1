import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from tworoute.analysis import grenoble_scenario, make_grid, sweep
from tworoute.cli import EXIT_INVALID, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main
from tworoute.plots import emit_svg
from tworoute.scenario_io import bundled_path, write_scenario

GOLDEN = Path(__file__).parent / "golden"


def bundled(name):
    return str(bundled_path(name))


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- equilibrium -----------------------------------------------------------


def test_equilibrium_symmetric_to_stdout(capsys):
    assert main(["equilibrium", "--scenario", bundled("symmetric")]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    np.testing.assert_allclose(doc["state"], [10, 10])
    assert doc["mode"] == "SF-SF"


def test_equilibrium_general_to_file(tmp_path, capsys):
    out = tmp_path / "eq.json"
    assert main(["equilibrium", "--scenario", bundled("grenoble_phi3000"), "--general",
                 "--out", str(out)]) == EXIT_OK
    assert capsys.readouterr().out == ""
    doc = json.loads(out.read_text())
    assert doc["method"] == "bisection"


# --- simulate --------------------------------------------------------------


def test_simulate_csv(tmp_path):
    out = tmp_path / "traj.csv"
    code = main(["simulate", "--scenario", bundled("grenoble_phi2000"), "--x0", "200,100",
                 "--horizon", "0.5", "--dt", "0.001", "--out", str(out)])
    assert code == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 501
    assert float(rows[-1]["t"]) == 0.5
    assert rows[0]["mode1"] == "UC"  # requested 1342 veh/h exceeds supply 838 veh/h


def test_simulate_default_step_and_events(capsys):
    code = main(["simulate", "--scenario", bundled("grenoble_phi2000"), "--x0", "200,100",
                 "--horizon", "0.2", "--locate-events"])
    assert code == EXIT_OK
    assert capsys.readouterr().out.startswith("t,x1,x2,mode1,mode2")


def test_simulate_state_outside_box(capsys):
    code = main(["simulate", "--scenario", bundled("grenoble_phi2000"), "--x0", "0,999"])
    assert code == EXIT_INVALID
    assert "outside" in capsys.readouterr().err


def test_simulate_invalid_scenario_needs_flag(tmp_path, capsys):
    path = tmp_path / "hot.yaml"
    write_scenario(grenoble_scenario(5000.0), path)
    assert main(["simulate", "--scenario", str(path), "--x0", "0,0", "--horizon", "0.1"]) == 1
    assert "well-dimensioned" in capsys.readouterr().err
    assert main(["simulate", "--scenario", str(path), "--x0", "0,0", "--horizon", "0.1",
                 "--allow-invalid"]) == EXIT_OK


# --- sweep -----------------------------------------------------------------


def test_sweep_moderate_demand(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--scenario", bundled("grenoble_phi2000"), "--vary", "alpha",
                 "--from", "0", "--to", "1", "--step", "0.01", "--out", str(out),
                 "--svg", str(tmp_path / "charts")])
    assert code == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 101
    assert all(float(r["unsat1"]) == 0 and float(r["unsat2"]) == 0 for r in rows)
    best = min(rows, key=lambda r: float(r["J"]))
    assert float(best["param"]) == pytest.approx(0.14)
    side = json.loads(out.with_suffix(".thresholds.json").read_text())
    assert side["alpha_bar"] == pytest.approx(0.1422, abs=1e-4)
    assert sorted(p.name for p in (tmp_path / "charts").iterdir()) == [
        "sweep_alpha_J.svg", "sweep_alpha_split.svg", "sweep_alpha_unsat.svg"]


def test_sweep_bad_grid_is_usage_error(capsys):
    code = main(["sweep", "--scenario", bundled("grenoble_phi2000"), "--vary", "alpha",
                 "--from", "1", "--to", "0", "--step", "0.1"])
    assert code == EXIT_USAGE


# --- verify ----------------------------------------------------------------


def test_verify_passes(capsys):
    code = main(["verify", "--scenario", bundled("symmetric"), "--checks",
                 "k_condition,equilibrium_uniqueness", "--seed", "4"])
    assert code == EXIT_OK
    captured = capsys.readouterr()
    reports = json.loads(captured.out)
    assert [r["name"] for r in reports] == ["k_condition", "equilibrium_uniqueness"]
    assert reports[0]["seed"] == 4
    assert "k_condition: pass" in captured.err


def test_verify_failure_exit_code(monkeypatch, capsys):
    from tworoute import cli, verify

    def failing(scn, seed=0):
        return verify._report("k_condition", scn, seed, 1, -1.0, 0.0, "veh/km/h", status="fail")

    monkeypatch.setitem(cli.CHECKS, "k_condition", failing)
    code = main(["verify", "--scenario", bundled("symmetric"), "--checks", "k_condition"])
    assert code == EXIT_VERIFY


def test_verify_unknown_check(capsys):
    assert main(["verify", "--scenario", bundled("symmetric"), "--checks", "bogus"]) == 64


# --- case study ------------------------------------------------------------


@pytest.mark.parametrize("phi", [2000, 3000])
def test_case_study_matches_golden(phi, tmp_path):
    assert main(["case-study", "--phi", str(phi), "--out", str(tmp_path)]) == EXIT_OK
    produced = (tmp_path / f"case_study_phi{phi}.csv").read_text()
    assert produced == (GOLDEN / f"case_study_phi{phi}.csv").read_text()
    for ch in ("split", "J", "unsat"):
        assert (tmp_path / f"sweep_alpha_{ch}.svg").stat().st_size > 1000


def test_case_study_unsatisfied_onset(tmp_path):
    main(["case-study", "--phi", "3000", "--out", str(tmp_path)])
    rows = read_csv(tmp_path / "case_study_phi3000.csv")
    first = next(r for r in rows if float(r["unsat2"]) > 0)
    assert float(first["param"]) == 0.7


def test_case_study_is_bit_stable(tmp_path):
    for d in ("a", "b"):
        main(["case-study", "--phi", "2000", "--out", str(tmp_path / d)])
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


# --- usage and input errors ------------------------------------------------


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["equilibrium"],
    ["case-study", "--phi", "2500", "--out", "x"],
    ["simulate", "--scenario", "s.yaml", "--x0", "1"],
    ["sweep", "--scenario", "s.yaml", "--vary", "beta", "--from", "0", "--to", "1",
     "--step", "0.1"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE
    captured = capsys.readouterr()
    assert captured.out == "" and "usage" in captured.err


def test_help_exits_zero(capsys):
    assert main(["--help"]) == EXIT_OK


def test_parse_failure_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("route1: {}\n")
    assert main(["equilibrium", "--scenario", str(path)]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert "route1.capacity_veh_per_h" in err and "missing section 'route2'" in err


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["equilibrium", "--scenario", str(tmp_path / "none.yaml")]) == EXIT_INVALID


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tworoute", "equilibrium", "--scenario",
                           bundled("symmetric")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["mode"] == "SF-SF"
    proc = subprocess.run([sys.executable, "-m", "tworoute", "nope"], capture_output=True)
    assert proc.returncode == 64


# --- charts ----------------------------------------------------------------


def test_unsat_chart(tmp_path):
    res = sweep(grenoble_scenario(3000.0), "alpha", make_grid(0, 1, 0.01))
    path = emit_svg(res, "unsat", tmp_path / "u.svg")
    text = path.read_text()
    assert text.startswith("<?xml") and "route 2" in text and "J undefined" in text


def test_J_chart_marks_minimum(tmp_path):
    res = sweep(grenoble_scenario(2000.0), "alpha", make_grid(0, 1, 0.01))
    text = emit_svg(res, "J", tmp_path / "j.svg").read_text()
    assert "min at 0.14" in text and "J undefined" not in text


def test_empty_channel_writes_nothing(tmp_path):
    res = sweep(grenoble_scenario(3000.0), "alpha", make_grid(0.8, 1, 0.1))
    target = tmp_path / "j.svg"
    with pytest.raises(ValueError, match="no data"):
        emit_svg(res, "J", target)
    assert not target.exists()
    with pytest.raises(ValueError):
        emit_svg(res, "speed", target)
