"""Headline acceptance criteria, one test each, summarized at the end of the run."""

import filecmp
import json

import numpy as np
import pytest

import scenarios
from instances import random_problem
from offgrid_p2h.cli import main
from offgrid_p2h.config import SimConfig, default_plant, reference_emergency_plant
from offgrid_p2h.costing import EconParams, cost_breakdown, crf, replacement_plan
from offgrid_p2h.errors import Infeasible
from offgrid_p2h.rose import enumerate_solve, solve_schedule, validate_solution
from offgrid_p2h.runconfig import RunConfig
from offgrid_p2h.simulator import check_envelope, run_emergency_test, run_production_sim
from offgrid_p2h.sizing import optimize_battery, preset_config
from offgrid_p2h.socode import SOURCE, EmergencyEvent, SeverityTable, classify_severity, default_table
from test_costing import CRF_8_20, TOY, TOY_LCOH
from test_socode import LEVELS


@pytest.mark.acceptance(1, "scheduler matches exhaustive enumeration on 200 tiny instances")
def test_solver_matches_enumeration(stopwatch):
    rng = np.random.default_rng(2024)
    solved = infeasible = 0
    for _ in range(200):
        p = random_problem(rng)
        try:
            oracle = enumerate_solve(p)
        except Infeasible:
            with pytest.raises(Infeasible):
                solve_schedule(p)
            infeasible += 1
            continue
        sol = solve_schedule(p)
        assert abs(sol.objective - oracle.objective) <= 1e-6
        rep = validate_solution(p, sol)
        assert rep.passed, str(rep)
        solved += 1
    assert solved >= 150
    assert stopwatch() < 60.0


@pytest.mark.acceptance(2, "week simulation keeps balance, SOC, audit and envelope")
def test_week_invariants(stopwatch):
    plant = default_plant()
    tr = run_production_sim(SimConfig(window_periods=12), RunConfig().load_meteo(), plant)
    t = tr.totals
    assert t["duration_s"] == pytest.approx(7 * 86400.0)
    assert t["max_balance_residual_mw"] <= 1e-6
    assert t["energy_audit_rel_error"] <= 1e-6
    soc = tr.slf["soc"]
    assert soc.min() >= plant.battery.soc_min - 1e-12 and soc.max() <= plant.battery.soc_max + 1e-12
    assert np.all(np.diff(np.cumsum(tr.slf["h2_kg"])) >= 0) and t["hydrogen_kg"] > 0
    env = check_envelope(tr)
    assert env.passed and 45.0 <= env.f_nadir and env.f_peak <= 55.0 and 31.5 <= env.v_nadir and env.v_peak <= 38.5
    assert stopwatch() < 300.0


@pytest.mark.acceptance(3, "severity table boundary points, deadband and exact round trip")
def test_severity_table():
    table = default_table()
    for f, rocof, level in LEVELS:
        assert classify_severity(f, rocof, table).level == level
    assert classify_severity(49.50, -12.0, table).power_step == 6.0
    for f, rocof in [(50.0, 0.0), (49.90, -1.0), (50.10, 1.0), (49.80, -3.0)]:
        assert classify_severity(f, rocof, table) is None
    text = table.to_json()
    back = SeverityTable.from_json(text)
    assert back == table and back.to_json() == text
    assert json.loads(text) == json.loads(back.to_json())


@pytest.mark.acceptance(4, "emergency control shrinks the SOC excursion inside the envelope")
def test_emergency_ordering():
    cfg = SimConfig(horizon_s=60.0, record_fast="full")
    plant = reference_emergency_plant()
    ev = EmergencyEvent(10.0, SOURCE, 6.25, 0)
    on = run_emergency_test(cfg, plant, ev, True)
    off = run_emergency_test(cfg, plant, ev, False)

    def drop(tr):
        return tr.totals["soc_start"] - tr.totals["soc_min"]

    assert 0 < drop(on) < drop(off)
    assert check_envelope(on).passed and check_envelope(off).passed


@pytest.mark.acceptance(5, "LCOH and replacement count match the independent oracle")
def test_costing_oracle():
    assert crf(0.08, 20) == pytest.approx(CRF_8_20, rel=1e-9)
    assert round(crf(0.08, 20), 7) == 0.1018522
    assert cost_breakdown(TOY, EconParams(), 500_000.0, 0.0).lcoh == pytest.approx(TOY_LCOH, rel=1e-9)
    assert replacement_plan(0.20, 0.0487, 20)[1] == 4


@pytest.mark.acceptance(6, "optimal battery shrinks with faster ramps and shorter SLF steps (3x3)")
def test_sizing_monotone(stopwatch):
    caps = np.zeros((len(scenarios.SLF_STEPS), len(scenarios.RAMPS)))
    for i, slf_s in enumerate(scenarios.SLF_STEPS):
        for j, ramp in enumerate(scenarios.RAMPS):
            sizing, plant, power = scenarios.case(slf_s, ramp)
            caps[i, j] = optimize_battery(sizing, plant, EconParams(), power).battery.capacity_mwh
    print("\ncapacity MWh, rows slf", scenarios.SLF_STEPS, "cols ramp", scenarios.RAMPS, "\n", caps)
    assert np.all(np.diff(caps, axis=0) >= -1e-9)  # longer SLF step never needs less
    assert np.all(np.diff(caps, axis=1) <= 1e-9)  # faster ramp never needs more
    assert caps[-1, 0] > caps[0, -1]
    assert stopwatch() < 15 * 60.0


@pytest.mark.acceptance(7, "preset table entries for the first iterations, then non-decreasing")
def test_preset_table():
    s0, ds = 3.4, 0.5
    assert preset_config(0, s0, ds) == (s0, 2.0)
    assert preset_config(1, s0, ds) == (s0 + ds, 2.0)
    assert preset_config(2, s0, ds) == (s0 + ds, 3.0)
    caps = [preset_config(i, s0, ds)[0] for i in range(200)]
    assert caps == sorted(caps)


@pytest.mark.acceptance(8, "two simulate runs with the same config give identical files")
def test_simulate_deterministic(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"seed": 7, "sim": {"horizon_s": 7200.0, "window_periods": 6}}))
    dirs = []
    for name in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / name), "--no-timestamp"]) == 0
        dirs.append(tmp_path / name / "simulate")
    files = sorted(p.name for p in dirs[0].iterdir())
    assert files == sorted(p.name for p in dirs[1].iterdir()) and "fast.csv" in files
    match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], files, shallow=False)
    assert not mismatch and not errors
