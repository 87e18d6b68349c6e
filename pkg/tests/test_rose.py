import dataclasses

import highspy
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import random_problem
from offgrid_p2h.errors import DimensionMismatch, Infeasible, TooLarge
from offgrid_p2h.plant import SHUTDOWN, STANDBY, STARTED, AEParams, BatterySpec
from offgrid_p2h.rose import (
    RosesParams,
    ScheduleProblem,
    build_model,
    enumerate_solve,
    read_solution_values,
    solution_from_values,
    solve_counts,
    solve_schedule,
    validate_solution,
    write_lp,
)

AE5 = AEParams(standby_mw=0.1, capacity_mw=5.0)


def problem(wt, pv=None, aes=(AE5,), init=(STARTED,), cap=0.0, soc0=0.5, **params):
    wt = np.atleast_2d(np.asarray(wt, float))
    T = wt.shape[1]
    pv = np.zeros(T) if pv is None else np.asarray(pv, float)
    down = tuple(np.inf for _ in aes)
    return ScheduleProblem(T, 300.0, wt, pv, tuple(aes), tuple(init), down, BatterySpec(cap), soc0,
                           RosesParams(**params))


class TestBuild:
    def test_counts_one_unit_two_periods(self):
        c = solve_counts(problem([[5.0, 5.0]], cap=1.0))
        assert c["status_binaries"] == 12 and c["battery_binaries"] == 4
        model = build_model(problem([[5.0, 5.0]], cap=1.0))
        # (P, q) per unit-period, (C, D, SOC) per period, one WT cut and one PV cut per period
        assert c["continuous"] == 2 * 2 + 3 * 2 + 2 + 2 == model.n_continuous

    def test_empty_horizon(self):
        with pytest.raises(DimensionMismatch):
            ScheduleProblem(0, 300.0, np.zeros((1, 0)), np.zeros(0), (AE5,), (STARTED,), (np.inf,), BatterySpec(1.0), 0.5)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            ScheduleProblem(3, 300.0, np.zeros((1, 2)), np.zeros(3), (AE5,), (STARTED,), (np.inf,), BatterySpec(1.0), 0.5)

    def test_negative_price(self):
        with pytest.raises(ValueError):
            problem([[1.0]], h2_price=-1.0)

    def test_no_battery_fixes_flows(self):
        model = build_model(problem([[5.0, 5.0]], cap=0.0))
        b = model.vars.blocks
        for key in ("C", "D"):
            idx = b[key].ravel()
            assert (model.col_hi[idx] == 0).all() and (model.col_lo[idx] == 0).all()


class TestSolve:
    def test_full_load(self):
        sol = solve_schedule(problem([[5.0, 5.0]]))
        assert sol.status_strings() == ["SS"]
        assert np.allclose(sol.ae_power, 5.0) and sol.total_curtailment == pytest.approx(0.0, abs=1e-9)
        assert sol.objective == pytest.approx(-2 * 30.0 * 5000 / 55.62 * 300 / 3600, rel=1e-9)

    def test_nothing_to_schedule(self):
        sol = solve_schedule(problem([[0.0, 0.0, 0.0]], init=(SHUTDOWN,)))
        assert sol.status_strings() == ["DDD"] and sol.objective == pytest.approx(0.0, abs=1e-9)

    def test_weak_supply_is_curtailed(self):
        # 0.3 MW is below P_min = 0.5 MW and above the 0.1 MW standby draw
        p = problem([[0.3, 0.3]], init=(SHUTDOWN,), curtail_penalty=1000.0)
        sol = solve_schedule(p)
        oracle = enumerate_solve(p)
        assert sol.status_strings() == oracle.status_strings() == ["DD"]
        assert sol.objective == pytest.approx(2 * 1000.0 * 0.3, rel=1e-9)
        assert sol.objective == pytest.approx(oracle.objective, abs=1e-6)

    def test_infeasible_standby_without_supply(self):
        p = dataclasses.replace(problem([[0.0]], init=(STANDBY,)), fixed_status={(0, 0): STANDBY})
        with pytest.raises(Infeasible) as exc:
            solve_schedule(p)
        assert "hint" in exc.value.context

    def test_deterministic(self):
        p = random_problem(np.random.default_rng(11), 3, 6)
        a, b = solve_schedule(p), solve_schedule(p)
        assert a.to_dict() == b.to_dict()


class TestEnumerate:
    def test_singleton(self):
        p = dataclasses.replace(problem([[2.0]]), fixed_status={(0, 0): STARTED})
        assert enumerate_solve(p).candidates == 1

    def test_too_large(self):
        aes = (AEParams(0.1, min_down_s=300.0),) * 3
        with pytest.raises(TooLarge):
            enumerate_solve(problem(np.ones((1, 10)), aes=aes, init=(STARTED,) * 3))

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_solver(self, seed):
        p = random_problem(np.random.default_rng(seed))
        try:
            oracle = enumerate_solve(p)
        except Infeasible:
            with pytest.raises(Infeasible):
                solve_schedule(p)
            return
        sol = solve_schedule(p)
        assert sol.objective == pytest.approx(oracle.objective, abs=1e-6)
        assert validate_solution(p, sol).passed and validate_solution(p, oracle).passed


class TestValidate:
    def test_solver_output_clean(self):
        p = problem([[3.0, 6.0, 1.0]], cap=2.0)
        rep = validate_solution(p, solve_schedule(p))
        assert rep.passed, str(rep)

    def test_simultaneous_charge_and_discharge(self):
        p = problem([[3.0, 3.0]], cap=2.0)
        sol = solve_schedule(p)
        bad = dataclasses.replace(sol, charge=sol.charge + 0.5, discharge=sol.discharge + 0.5)
        assert "charge_exclusive" in validate_solution(p, bad).violations

    def test_cycle_drift(self):
        cap = 2.0
        p = problem([[1.0, 1.0]], cap=cap, soc0=0.5)
        sol = solve_schedule(p)
        # discharge 0.08 of capacity into the AE in the first period, then hold
        d = 0.08 * cap * 0.95 / (300 / 3600)
        power = np.array([[1.0 + d, 1.0]])
        bad = dataclasses.replace(sol, charge=np.zeros(2), discharge=np.array([d, 0.0]), soc=np.array([0.42, 0.42]),
                                  ae_power=power, h2_rate=power * 1000 / 55.62, wt_cut=np.zeros((1, 2)),
                                  st=np.ones((1, 2)), sb=np.zeros((1, 2)), sp=np.zeros((1, 2)))
        assert validate_solution(p, bad).violations == ["soc_cycle"]


def test_lp_export_round_trip(tmp_path):
    p = random_problem(np.random.default_rng(5), 2, 3)
    path = tmp_path / "sched.lp"
    write_lp(p, path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    h.run()
    assert h.getModelStatus() == highspy.HighsModelStatus.kOptimal
    names = [h.getColName(j)[1] for j in range(h.getNumCol())]
    text = "# external result\n" + "\n".join(f"{n} {v!r}" for n, v in zip(names, h.getSolution().col_value))
    (tmp_path / "sol.txt").write_text(text + "\n")
    sol = solution_from_values(p, read_solution_values(tmp_path / "sol.txt"))
    assert sol.objective == pytest.approx(solve_schedule(p).objective, abs=1e-6)
    assert validate_solution(p, sol).passed


def test_import_rejects_missing_variables():
    p = problem([[1.0]])
    with pytest.raises(DimensionMismatch):
        solution_from_values(p, {"bogus": 1.0})


@given(st.integers(0, 10_000))
@settings(max_examples=15)
def test_balance_holds(seed):
    p = random_problem(np.random.default_rng(seed))
    try:
        sol = solve_schedule(p)
    except Infeasible:
        return
    assert validate_solution(p, sol).residuals["power_balance"] <= 1e-6


@given(st.integers(0, 10_000))
@settings(max_examples=15)
def test_permutation_symmetry(seed):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, 2, 3)
    ae = p.aes[0]
    p = dataclasses.replace(p, aes=(ae, ae), init_states=(STARTED, SHUTDOWN), init_downtime=(np.inf, 0.0))
    q = dataclasses.replace(p, init_states=(SHUTDOWN, STARTED), init_downtime=(0.0, np.inf))
    try:
        a = solve_schedule(p).objective
    except Infeasible:
        with pytest.raises(Infeasible):
            solve_schedule(q)
        return
    assert solve_schedule(q).objective == pytest.approx(a, abs=1e-6)


@given(st.integers(0, 10_000), st.floats(0.0, 500.0), st.floats(50.0, 1500.0))
@settings(max_examples=15)
def test_penalty_monotone(seed, low, extra):
    p = random_problem(np.random.default_rng(seed), 1, 3)
    lo = dataclasses.replace(p, params=dataclasses.replace(p.params, curtail_penalty=low))
    hi = dataclasses.replace(p, params=dataclasses.replace(p.params, curtail_penalty=low + extra))
    try:
        a, b = enumerate_solve(lo), enumerate_solve(hi)
    except Infeasible:
        return
    # optimality at both penalties gives (s_hi - s_lo)(cut_hi - cut_lo) <= 0 up to solver tolerance
    assert b.total_curtailment <= a.total_curtailment + 1e-5


@given(st.integers(0, 10_000))
@settings(max_examples=15)
def test_free_transitions_decouple_periods(seed):
    rng = np.random.default_rng(seed)
    T = int(rng.integers(2, 5))
    aes = (AEParams(0.1, capacity_mw=float(rng.choice([2.0, 5.0])), min_down_s=300.0),) * 2
    wt = rng.uniform(0, 6, (1, T))
    pv = rng.uniform(0, 2, T)
    params = dict(h2_price=float(rng.uniform(5, 50)), c_up_hot=0.0, c_up_cold=0.0, c_down=0.0,
                  curtail_penalty=float(rng.uniform(0, 2000)))
    joint = enumerate_solve(problem(wt, pv, aes, (STARTED, STARTED), **params))
    total = 0.0
    for t in range(T):
        total += enumerate_solve(problem(wt[:, t : t + 1], pv[t : t + 1], aes, (STARTED, STARTED), **params)).objective
    assert joint.objective == pytest.approx(total, abs=1e-6)
