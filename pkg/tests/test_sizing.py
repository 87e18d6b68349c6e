import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import scenarios
from offgrid_p2h.config import Envelope, SimConfig, default_plant, reference_emergency_plant
from offgrid_p2h.costing import EconParams, lcoh
from offgrid_p2h.errors import ExhaustedIterations, PreconditionError
from offgrid_p2h.ingest import PowerSeries
from offgrid_p2h.plant import BatterySpec
from offgrid_p2h.sizing import (
    TABLE_COLUMNS,
    check_code,
    check_energy_balance,
    check_gfm_ability,
    optimize_battery,
    preset_config,
    table_csv,
)
from offgrid_p2h.socode import SOURCE, EmergencyEvent


class TestPreset:
    def test_first(self):
        assert preset_config(0, 1.0, 0.5) == (1.0, 2.0)

    def test_second_step_at_three_c(self):
        assert preset_config(2, 1.0, 0.5) == (1.5, 3.0)

    def test_fifth(self):
        assert preset_config(5, 1.0, 0.5) == (2.5, 2.0)

    def test_negative(self):
        with pytest.raises(ValueError):
            preset_config(-1, 1.0, 0.5)

    @given(st.floats(0.1, 10), st.floats(0.01, 2), st.integers(1, 40))
    def test_each_capacity_twice(self, s0, ds, n):
        seq = [preset_config(i, s0, ds) for i in range(1, 2 * n + 1)]
        caps = [c for c, _ in seq]
        assert caps == sorted(caps)
        for k in range(n):
            pair = seq[2 * k : 2 * k + 2]
            assert pair[0][0] == pair[1][0] and sorted(r for _, r in pair) == [2.0, 3.0]


def step_day(lift, hold=240):
    """Supply that jumps by ``lift`` MW at t = 60 s and stays there."""
    t = np.arange(0.0, hold + 1.0)
    wt = np.zeros((3, t.size))
    wt[0] = np.where(t < 60, 10.0, 10.0 + lift)
    return PowerSeries(0.0, 1.0, wt, np.zeros(t.size), (6.25,) * 3, 5.0)


FROZEN = SimConfig(horizon_s=240.0, use_schedule=False, init_states=("started",) * 4, init_ae_mw=(2.5,) * 4,
                   record_fast="none")


class TestGfm:
    # AEs that cannot move leave the whole step to the battery
    PLANT = default_plant().with_ae(ramp_mw_s=1e-9)

    def test_large_battery_calm_day(self):
        assert check_gfm_ability(BatterySpec(5.0), self.PLANT, [step_day(0.5)], FROZEN).passed

    def test_no_battery(self):
        res = check_gfm_ability(BatterySpec(0.0), self.PLANT, [step_day(2.0)], FROZEN)
        assert not res.passed and res.detail["days"][0]["clip_events"] > 0

    def test_step_equal_to_power_rating(self):
        spec = BatterySpec(1.0, c_rate=2.0)
        assert check_gfm_ability(spec, self.PLANT, [step_day(spec.p_max)], FROZEN).passed
        assert not check_gfm_ability(spec, self.PLANT, [step_day(spec.p_max + 1e-4)], FROZEN).passed


class TestCode:
    SIM = SimConfig(horizon_s=60.0, record_fast="none")
    PLANT = reference_emergency_plant()

    def test_adequate_battery(self):
        res = check_code(self.PLANT.battery, self.PLANT, [EmergencyEvent(10.0, SOURCE, 6.25, 0)], self.SIM)
        assert res.passed
        assert 49.0 < res.detail["events"][0]["f_nadir"] < 50.0

    def test_empty_battery(self):
        from offgrid_p2h.simulator import EmergencyScenario

        spec = BatterySpec(0.05, c_rate=2.0)
        sc = EmergencyScenario(soc0=spec.soc_min)
        res = check_code(spec, self.PLANT, [EmergencyEvent(10.0, SOURCE, 6.25, 0)], self.SIM, sc)
        assert not res.passed

    def test_no_events(self):
        with pytest.raises(PreconditionError):
            check_code(self.PLANT.battery, self.PLANT, [], self.SIM)


class TestBalance:
    def test_pass(self):
        sizing, plant, power = scenarios.case(5.0, 0.01)
        assert check_energy_balance(BatterySpec(2.0), plant, power, sizing.balance_sim).passed

    def test_tiny_battery(self):
        sizing, plant, power = scenarios.case(5.0, 0.01)
        res = check_energy_balance(BatterySpec(0.02), plant, power, sizing.balance_sim)
        assert not res.passed and res.detail["first_failure_time"] is not None

    def test_short_data(self):
        sizing, plant, power = scenarios.case(5.0, 0.01)
        sim = dataclasses.replace(sizing.balance_sim, horizon_s=10 * 3600.0)
        with pytest.raises(PreconditionError):
            check_energy_balance(BatterySpec(2.0), plant, power, sim)


def test_checks_monotone_in_size():
    sizing, plant, power = scenarios.case(10.0, 0.0075)
    specs = [BatterySpec(c, c_rate=r) for c in (0.8, 1.2, 1.6, 2.0) for r in (2.0, 3.0)]
    passed = {(s.capacity_mwh, s.c_rate): check_energy_balance(s, plant, power, sizing.balance_sim).passed
              and check_gfm_ability(s, plant, [power], sizing.gfm_sim).passed for s in specs}
    for (c, r), ok in passed.items():
        if ok:
            assert all(v for (c2, r2), v in passed.items() if c2 >= c and r2 >= r)


class TestOptimize:
    def test_immediate_convergence(self):
        sizing, plant, power = scenarios.case(5.0, 0.01)
        rep = optimize_battery(dataclasses.replace(sizing, s_init=2.0), plant, EconParams(), power)
        assert len(rep.iterations) == 1 and rep.battery.capacity_mwh == 2.0 and rep.battery.c_rate == 2.0

    def test_threshold_two_steps_up(self):
        # this cell needs 0.8 MWh; starting at 0.6 the search ends at s_init + 2 dS
        sizing, plant, power = scenarios.case(5.0, 0.01)
        rep = optimize_battery(dataclasses.replace(sizing, s_init=0.6), plant, EconParams(), power)
        assert rep.battery.capacity_mwh == pytest.approx(0.6 + 2 * 0.1)
        assert all(h["failed"] for h in rep.iterations[:-1])
        # LCOH is the one costing recomputes from the final run
        again = lcoh(plant.with_battery(rep.battery.capacity_mwh, rep.battery.c_rate), EconParams(), rep.trace)
        assert rep.cost.lcoh == again.lcoh

        longer = optimize_battery(dataclasses.replace(sizing, s_init=0.6, max_iter=60), plant, EconParams(), power)
        assert longer.battery == rep.battery and longer.cost.lcoh == rep.cost.lcoh

    def test_impossible(self):
        sizing, plant, power = scenarios.case(5.0, 0.01)
        # a 6 MW loss inside a 0.01 Hz band would need a battery rated near 150 MW
        strict = dataclasses.replace(sizing.code_sim, envelope=Envelope(f_min=49.99, f_max=50.01))
        loss = (EmergencyEvent(10.0, SOURCE, 6.0, 0),)
        with pytest.raises(ExhaustedIterations):
            optimize_battery(dataclasses.replace(sizing, code_sim=strict, events=loss, max_iter=3, s_init=2.0),
                             plant, EconParams(), power)

    def test_table_csv(self):
        sizing, plant, power = scenarios.case(5.0, 0.01)
        rep = optimize_battery(dataclasses.replace(sizing, s_init=2.0), plant, EconParams(), power)
        lines = table_csv([rep.table_row()]).splitlines()
        assert lines[0].split(",") == list(TABLE_COLUMNS) and len(lines) == 2
        assert rep.max_load_regulation_mw == pytest.approx(0.05)
