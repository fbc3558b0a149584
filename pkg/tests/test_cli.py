import csv
import json

import numpy as np
import pytest

from acbf.cli import EXIT_AUDIT, EXIT_DATA, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from acbf.model import eval_plant_derivative
from acbf.scenarios import load_scenario
from acbf.tightening import Dataset, write_dataset_csv


def test_check_example1(capsys):
    assert main(["check", "--scenario", "example1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "initial-condition margin (iv): 0.420429 PASS" in out
    assert "91 checked, 0 outside the safe set, 0 empty PASS" in out


def test_check_example3_full_reports_stacked_bounds(capsys):
    assert main(["check", "--scenario", "example3-full"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "b* = [1.]" in out
    assert "mu_bar = [66.143783], nu_bar = [5.830952]" in out


def test_unknown_scenario_lists_presets(capsys):
    assert main(["run", "--scenario", "nosuch"]) == EXIT_USAGE
    err = capsys.readouterr().err
    for name in ("example1", "example2", "example3", "example3-full"):
        assert name in err


def test_bad_flag_value_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--scenario", "example1", "--dt", "-1"])
    assert exc.value.code == EXIT_USAGE


def test_lowered_bound_override_rejected(tmp_path, capsys):
    cfg = tmp_path / "low.yaml"
    cfg.write_text("nominal:\n  mu_bar: [10.0]\n")
    assert main(["check", "--scenario", "example1", "--config", str(cfg)]) == EXIT_USAGE
    assert "only raise" in capsys.readouterr().err


def test_audit_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "near.yaml"
    cfg.write_text("initial:\n  x0: [1.2]\n")
    assert main(["check", "--scenario", "example1", "--config", str(cfg)]) == EXIT_AUDIT
    assert "FAIL" in capsys.readouterr().out


def exact_recovery_dataset(path):
    sc = load_scenario("example3")
    x = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]])
    u = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    xd = np.array([eval_plant_derivative(sc.system, sc.truth, xi, ui) for xi, ui in zip(x, u)])
    write_dataset_csv(Dataset(x, xd, u), path)
    return xd


def test_tighten_exact_recovery(tmp_path, capsys):
    data = tmp_path / "exact.csv"
    exact_recovery_dataset(data)
    out = tmp_path / "b.json"
    assert main(["tighten", "--scenario", "example3", "--dataset", str(data), "--out", str(out)]) == EXIT_OK
    report = json.loads(out.read_text())
    for ch in report["channels"]:
        for item in ch["theta"] + ch["lambda"]:
            assert item["lo"] == item["hi"]
    assert "width ratio 0.0000" in capsys.readouterr().out


def test_tighten_corrupted_sample(tmp_path, capsys):
    data = tmp_path / "bad.csv"
    sc = load_scenario("example3")
    x = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.5, 0.5, 0.0, 0.0]])
    u = np.zeros((3, 2))
    xd = np.array([eval_plant_derivative(sc.system, sc.truth, xi, ui) for xi, ui in zip(x, u)])
    xd[2, 2] += 100.0
    write_dataset_csv(Dataset(x, xd, u), data)
    code = main(["tighten", "--scenario", "example3", "--dataset", str(data), "--out", str(tmp_path / "b.json")])
    assert code == EXIT_DATA
    assert "sample 2" in capsys.readouterr().err


def test_tighten_empty_dataset_warns(tmp_path):
    data = tmp_path / "empty.csv"
    data.write_text("t,x_1,x_2,x_3,x_4,xdot_1,xdot_2,xdot_3,xdot_4,u_1,u_2\n")
    out = tmp_path / "b.json"
    with pytest.warns(RuntimeWarning, match="empty dataset"):
        assert main(["tighten", "--scenario", "example3", "--dataset", str(data), "--out", str(out)]) == EXIT_OK
    for ch in json.loads(out.read_text())["channels"]:
        for item in ch["theta"] + ch["lambda"]:
            assert (item["lo"], item["hi"]) == (item["prior_lo"], item["prior_hi"])


def test_run_example1_abort_writes_dump(tmp_path, capsys):
    out = tmp_path / "e1.csv"
    assert main(["run", "--scenario", "example1", "--t-end", "0.02", "--out", str(out)]) == EXIT_RUNTIME
    dump = json.loads((tmp_path / "e1.abort.json").read_text())
    assert "non-finite" in dump["error"] and dump["t"] < 0.02
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert rows and min(float(r["h"]) for r in rows) >= 0.0


def test_run_data_driven_writes_bounds_and_is_deterministic(tmp_path, capsys):
    args = ["run", "--scenario", "example2", "--t-end", "0.2", "--data-driven", "--seed", "7"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.bounds.json").exists() and (tmp_path / "a.dataset.csv").exists()
    summary = json.loads((tmp_path / "a.summary.json").read_text())
    assert summary["min_h"] >= 0 and summary["infeasible_count"] == 0


def test_sweep_table(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code = main(["sweep", "--scenario", "example2", "--t-end", "0.1", "--flag", "dt", "--values", "0.002,0.001",
                 "--out", str(out)])
    assert code == EXIT_OK
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["dt"]) for r in rows] == [0.002, 0.001]
    assert all(r["status"] == "ok" for r in rows)


def test_sweep_reports_aborts(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code = main(["sweep", "--scenario", "example1", "--t-end", "0.01", "--values", "1e-4", "--out", str(out)])
    assert code == EXIT_RUNTIME
    with open(out) as fh:
        assert next(csv.DictReader(fh))["status"] == "aborted"
