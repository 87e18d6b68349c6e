"""Iterative battery sizing: walk a preset (capacity, C-rate) table and keep
the first candidate that passes the grid-forming, emergency and long-term
balance checks."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import PlantConfig, SimConfig
from .costing import CostBreakdown, EconParams, lcoh
from .errors import ExhaustedIterations, PreconditionError
from .ingest import MeteoSeries, PowerSeries, to_power_series
from .plant import BatterySpec
from .simulator import EmergencyScenario, SimTrace, check_envelope, run_emergency_test, run_production_sim
from .socode import LOAD, SOURCE, EmergencyEvent

YEAR_S = 8760 * 3600.0


def preset_config(iteration: int, s_init: float, delta_s: float) -> tuple[float, float]:
    """Candidate (capacity MWh, C-rate) for a search iteration.

    Iteration 0 is the initial size at 2C; afterwards each capacity step is
    tried at 2C (odd iterations) and then at 3C (even iterations).
    """
    if iteration < 0:
        raise ValueError("iteration must be non-negative")
    if iteration == 0:
        return s_init, 2.0
    return s_init + math.ceil(iteration / 2) * delta_s, (2.0 if iteration % 2 else 3.0)


def default_initial_size(plant: PlantConfig) -> float:
    """5 % of installed source capacity, in MWh."""
    pv = plant.pv.rating_mw if plant.pv is not None else 0.0
    return 0.05 * (sum(w.rating_mw for w in plant.wts) + pv)


def default_events(plant: PlantConfig, scenario: EmergencyScenario, at: float = 10.0) -> tuple:
    """Largest single source loss and largest single AE loss at the scenario
    operating point."""
    wt = int(np.argmax(scenario.wt_mw))
    total = sum(scenario.wt_mw) + scenario.pv_mw
    ae_mw = scenario.ae_mw or tuple(total / len(plant.aes) for _ in plant.aes)
    ae = int(np.argmax(ae_mw))
    return (
        EmergencyEvent(at, SOURCE, float(scenario.wt_mw[wt]), wt),
        EmergencyEvent(at, LOAD, float(ae_mw[ae]), ae),
    )


@dataclass(frozen=True)
class SizingConfig:
    s_init: Optional[float] = None  # MWh; None -> 5 % of source capacity
    delta_s: float = 0.1  # MWh
    max_iter: int = 40
    gfm_sim: SimConfig = SimConfig(horizon_s=86400.0, record_fast="none")
    # s from the start of the data; default: one day per season of a year
    gfm_day_starts: tuple = (79 * 86400.0, 171 * 86400.0, 265 * 86400.0, 354 * 86400.0)
    code_sim: SimConfig = SimConfig(horizon_s=120.0, record_fast="none")
    code_scenario: EmergencyScenario = EmergencyScenario()
    events: Optional[tuple] = None  # None -> largest source and load loss
    balance_sim: SimConfig = SimConfig(horizon_s=YEAR_S, fast_s=5.0, record_fast="none")

    def __post_init__(self):
        if self.delta_s <= 0:
            raise ValueError("capacity step must be positive")
        if self.max_iter < 1:
            raise ValueError("need at least one iteration")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict
    runtime_s: float = 0.0
    trace: Optional[SimTrace] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "runtime_s": self.runtime_s}


def _with_spec(plant: PlantConfig, spec: BatterySpec) -> PlantConfig:
    return dataclasses.replace(plant, battery=spec)


def _window(power: PowerSeries, start_s: float, duration_s: float) -> PowerSeries:
    i0 = int(round(start_s / power.step))
    i1 = i0 + int(math.ceil(duration_s / power.step)) + 1
    if i0 < 0 or i1 > len(power):
        raise PreconditionError("scenario window outside the data", start_s=start_s, duration_s=duration_s)
    return dataclasses.replace(power, start_epoch=power.start_epoch + i0 * power.step,
                               per_wt=power.per_wt[:, i0:i1], pv=power.pv[i0:i1])


def check_gfm_ability(spec: BatterySpec, plant: PlantConfig, days, sim: SimConfig) -> CheckResult:
    """Fast-tier runs over representative days; passes when the envelope
    holds and the battery never clips."""
    t0 = time.perf_counter()
    p = _with_spec(plant, spec)
    per_day = []
    ok = True
    for day in days:
        tr = run_production_sim(sim, day, p)
        env = check_envelope(tr, sim.envelope)
        clips = tr.totals["clip_events"]
        per_day.append({"passed_envelope": env.passed, "clip_events": clips, "f_nadir": env.f_nadir,
                        "f_peak": env.f_peak, "first_violation_time": env.first_violation_time})
        if not env.passed or clips:
            ok = False
            break
    return CheckResult("gfm", ok, {"days": per_day}, time.perf_counter() - t0)


def check_code(spec: BatterySpec, plant: PlantConfig, events, sim: SimConfig,
               scenario: EmergencyScenario | None = None) -> CheckResult:
    """Unit-loss runs with the emergency response on; passes when the
    envelope holds and SOC stays inside its band."""
    if not events:
        raise PreconditionError("emergency check needs at least one event")
    t0 = time.perf_counter()
    p = _with_spec(plant, spec)
    runs = []
    ok = True
    for ev in events:
        tr = run_emergency_test(sim, p, ev, socode_enabled=True, scenario=scenario)
        env = check_envelope(tr, sim.envelope)
        soc_ok = spec.soc_min - 1e-9 <= tr.totals["soc_min"] and tr.totals["soc_max"] <= spec.soc_max + 1e-9
        runs.append({"side": ev.side, "lost_mw": ev.lost_power, "passed_envelope": env.passed, "soc_ok": soc_ok,
                     "f_nadir": env.f_nadir, "f_peak": env.f_peak,
                     "soc_min": tr.totals["soc_min"], "soc_max": tr.totals["soc_max"]})
        if not (env.passed and soc_ok):
            ok = False
            break
    return CheckResult("code", ok, {"events": runs}, time.perf_counter() - t0)


def window_drifts(trace: SimTrace, window_s: float, every_s: float) -> tuple[np.ndarray, np.ndarray]:
    """(start time, |SOC change|) for a window of ``window_s`` seconds
    starting at each schedule re-solve (every ``every_s`` seconds)."""
    t = trace.slf["t"]
    soc = np.concatenate([[trace.totals.get("soc_start", trace.slf["soc"][0])], trace.slf["soc"]])
    if t.size < 2:
        return np.zeros(0), np.zeros(0)
    step = t[1] - t[0]
    w = max(1, int(round(window_s / step)))
    stride = max(1, int(round(every_s / step)))
    starts = np.arange(0, soc.size, stride)
    ends = np.minimum(starts + w, soc.size - 1)
    return starts * step, np.abs(soc[ends] - soc[starts])


def realized_drift(trace: SimTrace, window_s: float, every_s: float) -> float:
    """Largest SOC change over any scheduling window."""
    _, d = window_drifts(trace, window_s, every_s)
    return float(d.max()) if d.size else 0.0


def check_energy_balance(spec: BatterySpec, plant: PlantConfig, power: PowerSeries, sim: SimConfig) -> CheckResult:
    """Schedule and SLF tiers over the balance horizon (fast step equal to the
    SLF step). Passes with no SOC-bound clips, no schedule holds and SOC
    drift inside the cycle band over every scheduling window."""
    if power.duration + 1e-9 < sim.horizon_s:
        raise PreconditionError("data shorter than the balance horizon", data_s=power.duration,
                                horizon_s=sim.horizon_s)
    t0 = time.perf_counter()
    p = _with_spec(plant, spec)
    tr = run_production_sim(sim, power, p, socode_enabled=False)
    tol = plant.roses.cycle_tol
    starts, drifts = window_drifts(tr, sim.window_periods * sim.schedule_s, sim.schedule_s)
    drift = float(drifts.max()) if drifts.size else 0.0
    clips = tr.totals["clip_soc"]
    holds = tr.totals["schedule_holds"]
    # earliest of: first clipped step, first window whose drift breaks the band
    marks = []
    if clips and (tr.slf["clipped"] > 0).any():
        marks.append(float(tr.slf["t"][np.flatnonzero(tr.slf["clipped"] > 0)[0]]))
    if (drifts > tol + 1e-9).any():
        marks.append(float(starts[np.flatnonzero(drifts > tol + 1e-9)[0]]))
    first = min(marks) if marks else None
    ok = clips == 0 and holds == 0 and drift <= tol + 1e-9
    detail = {"soc_clips": clips, "schedule_holds": holds, "max_window_drift": drift, "drift_tol": tol,
              "first_failure_time": first}
    return CheckResult("balance", ok, detail, time.perf_counter() - t0, trace=tr)


@dataclass
class SizingReport:
    iterations: list
    battery: BatterySpec
    cost: CostBreakdown
    checks: list
    ramp_mw_s: float
    slf_s: float
    trace: Optional[SimTrace] = field(default=None, repr=False)

    @property
    def max_load_regulation_mw(self) -> float:
        return self.ramp_mw_s * self.slf_s

    def table_row(self) -> dict:
        return {
            "slf_step_s": self.slf_s,
            "ramp_mw_s": self.ramp_mw_s,
            "battery_mwh": self.battery.capacity_mwh,
            "c_rate": self.battery.c_rate,
            "yearly_degradation": self.cost.annual_degradation,
            "max_load_regulation_mw": self.max_load_regulation_mw,
            "lcoh": self.cost.lcoh,
        }

    def to_dict(self) -> dict:
        return {
            "battery": {"capacity_mwh": self.battery.capacity_mwh, "c_rate": self.battery.c_rate},
            "cost": self.cost.to_dict(),
            "checks": [c.to_dict() for c in self.checks],
            "iterations": self.iterations,
            "summary": self.table_row(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


TABLE_COLUMNS = ("slf_step_s", "ramp_mw_s", "battery_mwh", "c_rate", "yearly_degradation", "max_load_regulation_mw", "lcoh")


def table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        w.writerow([repr(float(r[c])) for c in TABLE_COLUMNS])
    return buf.getvalue()


def optimize_battery(sizing: SizingConfig, plant: PlantConfig, econ: EconParams,
                     year_meteo: MeteoSeries | PowerSeries, progress=None) -> SizingReport:
    """First candidate of the preset table passing all three checks.

    Checks run in the order grid-forming, emergency, balance; the first
    failure moves on to the next preset entry. The balance run doubles as
    the production simulation used for the LCOH.
    """
    power = year_meteo if isinstance(year_meteo, PowerSeries) else to_power_series(year_meteo, plant.wts, plant.pv)
    if power.duration + 1e-9 < sizing.balance_sim.horizon_s:
        raise PreconditionError("data shorter than the balance horizon", data_s=power.duration,
                                horizon_s=sizing.balance_sim.horizon_s)
    s_init = sizing.s_init if sizing.s_init is not None else default_initial_size(plant)
    days = [_window(power, s, sizing.gfm_sim.horizon_s) for s in sizing.gfm_day_starts]
    events = sizing.events if sizing.events is not None else default_events(plant, sizing.code_scenario)
    history = []
    for it in range(sizing.max_iter):
        cap, c_rate = preset_config(it, s_init, sizing.delta_s)
        spec = dataclasses.replace(plant.battery, capacity_mwh=cap, c_rate=c_rate)
        checks = []
        failed = None
        for run in (
            lambda: check_gfm_ability(spec, plant, days, sizing.gfm_sim),
            lambda: check_code(spec, plant, events, sizing.code_sim, sizing.code_scenario),
            lambda: check_energy_balance(spec, plant, power, sizing.balance_sim),
        ):
            res = run()
            checks.append(res)
            if not res.passed:
                failed = res.name
                break
        history.append({"iteration": it, "capacity_mwh": cap, "c_rate": c_rate, "failed": failed,
                        "runtimes_s": {c.name: c.runtime_s for c in checks}})
        if progress is not None:
            progress(history[-1])
        if failed is None:
            final = _with_spec(plant, spec)
            trace = checks[-1].trace
            cost = lcoh(final, econ, trace)
            return SizingReport(history, spec, cost, checks, plant.aes[0].ramp_mw_s, sizing.gfm_sim.slf_s, trace)
    raise ExhaustedIterations("no preset candidate passed every check", iterations=sizing.max_iter,
                              last_capacity_mwh=history[-1]["capacity_mwh"])
