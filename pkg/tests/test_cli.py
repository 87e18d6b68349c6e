import csv
import json
import subprocess
import sys

import pytest

from offgrid_p2h.cli import main

SHORT_SIM = {"sim": {"horizon_s": 3600.0, "window_periods": 6}}

SMALL_GRID = {
    "sizing": {
        "s_init": 3.4,
        "max_iter": 2,
        "gfm_sim": {"horizon_s": 1800.0, "window_periods": 6, "record_fast": "none"},
        "gfm_day_starts": [0.0],
        "code_sim": {"horizon_s": 30.0, "record_fast": "none"},
        "balance_sim": {"horizon_s": 3600.0, "window_periods": 6, "record_fast": "none"},
    },
    "sensitivity": {"slf_steps_s": [5.0, 10.0], "ramps_mw_s": [0.05, 0.1]},
}


def write_config(tmp_path, data, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_validate_prints_resolved_config(tmp_path, capsys):
    assert main(["validate", "--config", write_config(tmp_path, {})]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["sim"]["slf_s"] == 5.0 and len(out["plant"]["aes"]) == 4


def test_simulate_writes_trace(tmp_path):
    cfg = write_config(tmp_path, SHORT_SIM)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o"), "--no-timestamp"]) == 0
    run = tmp_path / "o" / "simulate"
    for name in ("fast.csv", "slf.csv", "schedule.csv", "events.csv", "summary.json"):
        assert (run / name).is_file()
    summary = json.loads((run / "summary.json").read_text())
    assert summary["envelope"] == "pass"

    assert main(["export-plots", "--config", cfg, "--out", str(tmp_path / "o"), "--no-timestamp"]) == 0
    with (tmp_path / "o" / "plots" / "plot_data.csv").open() as fh:
        header = next(csv.reader(fh))
    assert header == ["tier", "time", "series", "value"]


def test_emergency_writes_comparison(tmp_path):
    cfg = write_config(tmp_path, {"emergency": {"horizon_s": 30.0}})
    assert main(["emergency", "--config", cfg, "--out", str(tmp_path / "o"), "--no-timestamp"]) == 0
    rows = json.loads((tmp_path / "o" / "emergency" / "comparison.json").read_text())
    assert len(rows) == 2 and {"socode_on", "socode_off"} <= set(rows[0])


def test_sensitivity_grid(tmp_path):
    cfg = write_config(tmp_path, SMALL_GRID)
    assert main(["sensitivity", "--config", cfg, "--out", str(tmp_path / "o"), "--no-timestamp"]) == 0
    with (tmp_path / "o" / "sensitivity" / "sensitivity.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert {(float(r["slf_step_s"]), float(r["ramp_mw_s"])) for r in rows} == {(5, 0.05), (5, 0.1), (10, 0.05), (10, 0.1)}


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, {"paths": {"meteo": "missing.csv"}})
    assert main(["simulate", "--config", cfg]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["code"] and "message" in err


def test_run_error_exit_code(tmp_path, capsys):
    # eight days asked of a seven-day sample
    cfg = write_config(tmp_path, {"sim": {"horizon_s": 8 * 86400.0}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    assert "message" in json.loads(capsys.readouterr().err)


def test_unknown_command(tmp_path):
    with pytest.raises(SystemExit):
        main(["fly", "--config", write_config(tmp_path, {})])


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, {})
    res = subprocess.run([sys.executable, "-m", "offgrid_p2h.cli", "validate", "--config", cfg],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["seed"] == 0
