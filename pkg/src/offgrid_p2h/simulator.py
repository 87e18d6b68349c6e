"""Tiered production simulation.

Three clocks: the schedule step (rolling MILP re-solve), the SLF step (AE load
correction) and the fast step (battery balancing, droop frequency/voltage,
emergency checks). The fast tier is evaluated in vectorized segments within
each SLF step; a segment ends early when an emergency response starts or ends
so that AE references are piecewise constant inside every segment.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .config import Envelope, PlantConfig, SimConfig
from .errors import (
    HorizonExceedsData,
    IllegalTransition,
    Infeasible,
    InsufficientHeadroom,
    MinDownViolation,
    PreconditionError,
    SolverTimeout,
)
from .ingest import MeteoSeries, PowerSeries, make_forecast, to_power_series
from .plant import (
    SHUTDOWN,
    STANDBY,
    STARTED,
    AEUnit,
    BatteryState,
    ae_reactive_power,
    ae_step,
    battery_limits,
    ramp_integral,
    soc_delta,
)
from .rose.problem import ScheduleProblem
from .rose.solve import solve_schedule
from .slf import SlfController
from .socode import (
    LOAD,
    SOURCE,
    EmergencyEvent,
    apply_emergency_response,
    first_activation,
)

FAST_COLUMNS = ("t", "f", "v", "rocof", "p_bat", "q_bat", "soc")
SLF_COLUMNS = (
    "t", "available", "forecast", "curtailment", "ae_total", "p_bat", "soc", "residual", "clipped",
    "h2_kg", "socode", "f_min", "f_max", "f_mean", "t_f_min", "t_f_max",
    "v_min", "v_max", "v_mean", "t_v_min", "t_v_max",
)
SCHEDULE_COLUMNS = ("t", "status", "objective", "gap", "periods", "commands", "baseline_mw", "planned_curtailment_mw")


@dataclass
class SimTrace:
    fast: dict
    slf: dict
    ae_power: np.ndarray  # (n_slf, n_ae) MW at the end of each SLF step
    schedule: list
    events: list
    totals: dict
    nominal_f: float = 50.0
    nominal_v: float = 35.0

    @property
    def n_slf(self) -> int:
        return len(self.slf.get("t", ()))

    def summary(self, envelope: Envelope | None = None) -> dict:
        rep = check_envelope(self, envelope or Envelope())
        t = self.totals
        return {
            "hydrogen_kg": t["hydrogen_kg"],
            "curtailment_mwh": t["curtailment_mwh"],
            "transitions": t["transitions"],
            "clip_events": t["clip_events"],
            "envelope": "pass" if rep.passed else "fail",
            "soc_min": t["soc_min"],
            "soc_max": t["soc_max"],
            "freq_peak": rep.f_peak,
            "freq_nadir": rep.f_nadir,
            "volt_peak": rep.v_peak,
            "volt_nadir": rep.v_nadir,
            "max_balance_residual_mw": t["max_balance_residual_mw"],
            "energy_audit_rel_error": t["energy_audit_rel_error"],
            "throughput_mwh": t["throughput_mwh"],
            "schedule_holds": t["schedule_holds"],
        }


# ---------------------------------------------------------------------------
# envelope check
# ---------------------------------------------------------------------------


@dataclass
class EnvelopeReport:
    passed: bool
    first_violation_time: Optional[float]
    f_peak: float
    f_nadir: float
    f_mean: float
    v_peak: float
    v_nadir: float
    v_mean: float
    f_max_dev_ratio: float
    v_max_dev_ratio: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def check_envelope(trace: SimTrace, bounds: Envelope | None = None) -> EnvelopeReport:
    """Checks every fast sample against the bounds. Steps whose full samples
    were not kept are represented by their recorded extremes."""
    b = bounds or Envelope()
    fs = trace.fast
    s = trace.slf
    pts_t, pts_f, pts_v = [np.asarray(fs.get("t", []), float)], [np.asarray(fs.get("f", []), float)], [np.asarray(fs.get("v", []), float)]
    if trace.n_slf:
        for tk, fk, vk in (("t_f_min", "f_min", None), ("t_f_max", "f_max", None), ("t_v_min", None, "v_min"), ("t_v_max", None, "v_max")):
            tt = np.asarray(s[tk], float)
            pts_t.append(tt)
            pts_f.append(np.asarray(s[fk], float) if fk else np.full(tt.shape, np.nan))
            pts_v.append(np.asarray(s[vk], float) if vk else np.full(tt.shape, np.nan))
    t = np.concatenate(pts_t)
    f = np.concatenate(pts_f)
    v = np.concatenate(pts_v)
    if t.size == 0:
        raise PreconditionError("trace has no fast-tier samples")
    bad = ((f < b.f_min) | (f > b.f_max)) & ~np.isnan(f)
    bad |= ((v < b.v_min) | (v > b.v_max)) & ~np.isnan(v)
    first = float(t[bad].min()) if bad.any() else None
    if trace.n_slf:
        f_mean = float(np.mean(s["f_mean"]))
        v_mean = float(np.mean(s["v_mean"]))
    else:
        f_mean = float(np.nanmean(f))
        v_mean = float(np.nanmean(v))
    f_peak, f_nadir = float(np.nanmax(f)), float(np.nanmin(f))
    v_peak, v_nadir = float(np.nanmax(v)), float(np.nanmin(v))
    f0, v0 = trace.nominal_f, trace.nominal_v
    return EnvelopeReport(
        passed=first is None,
        first_violation_time=first,
        f_peak=f_peak,
        f_nadir=f_nadir,
        f_mean=f_mean,
        v_peak=v_peak,
        v_nadir=v_nadir,
        v_mean=v_mean,
        f_max_dev_ratio=max(abs(f_peak - f0), abs(f_nadir - f0)) / f0,
        v_max_dev_ratio=max(abs(v_peak - v0), abs(v_nadir - v0)) / v0,
    )


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------


_LETTER = {STARTED: "S", STANDBY: "B", SHUTDOWN: "D"}


def _letters(states) -> str:
    return "".join(_LETTER[s] for s in states)


def _fleet_profile(units, refs, cmds, n: int, dt: float) -> np.ndarray:
    """Mean power of every AE over each of ``n`` fast steps, with the
    kinematics of ae_step."""
    m = len(units)
    p0, target, ramp = np.zeros(m), np.zeros(m), np.zeros(m)
    t_switch, after, const = np.full(m, math.inf), np.zeros(m), np.full(m, np.nan)
    for i, (u, ref, cmd) in enumerate(zip(units, refs, cmds)):
        p = u.params
        ramp[i] = p.ramp_mw_s
        band = min(max(ref, p.p_min), p.p_max)
        if u.state == SHUTDOWN:
            if cmd != STARTED:
                const[i] = 0.0
            p0[i], target[i] = p.p_min, band
        elif u.state == STANDBY:
            if cmd != STARTED:
                const[i] = p.standby_mw if cmd == STANDBY else 0.0
            p0[i], target[i] = p.p_min, band
        else:
            p0[i] = u.current_power
            if cmd == STARTED:
                target[i] = band
            else:
                target[i] = p.p_min
                t_switch[i] = (p0[i] - p.p_min) / p.ramp_mw_s if p.ramp_mw_s > 0 else 0.0
                after[i] = p.standby_mw if cmd == STANDBY else 0.0
    edges = np.arange(n + 1) * dt
    te = np.minimum(edges[None, :], t_switch[:, None])
    integ = ramp_integral(p0[:, None], target[:, None], ramp[:, None], te)
    integ = integ + after[:, None] * np.maximum(edges[None, :] - t_switch[:, None], 0.0)
    out = np.diff(integ, axis=1) / dt
    fixed = ~np.isnan(const)
    out[fixed] = const[fixed, None]
    return out


def _even_split(aes, states, base) -> np.ndarray:
    """Spread the started units' total baseline at a common load fraction.

    With a linear hydrogen coefficient the solver is indifferent to how power
    is split among identical units, so its per-unit values are arbitrary.
    """
    out = np.asarray(base, float).copy()
    on = [i for i, s in enumerate(states) if s == STARTED]
    if len(on) < 2:
        return out
    total = float(out[on].sum())
    lo = np.array([aes[i].p_min for i in on])
    hi = np.array([aes[i].p_max for i in on])
    cap = np.array([aes[i].capacity_mw for i in on])
    a, b = 0.0, float((hi / cap).max())
    for _ in range(60):
        lam = 0.5 * (a + b)
        if np.clip(lam * cap, lo, hi).sum() < total:
            a = lam
        else:
            b = lam
    out[on] = np.clip(b * cap, lo, hi)
    return out


def _battery_path(bat, soc0: float, req: np.ndarray, dt: float):
    """Battery power (discharge positive) and end-of-step SOC following a
    request profile within the power rating and the SOC band.

    Vectorized between bound contacts; while SOC sits on a bound, requests
    pushing further are refused in bulk.
    """
    n = req.size
    if bat.capacity_mwh <= 0:
        return np.zeros(n), np.full(n, soc0)
    lo, hi = min(bat.soc_min, soc0), max(bat.soc_max, soc0)
    b = np.clip(req, -bat.p_max, bat.p_max)
    socs = np.empty(n)
    s, k = soc0, 0
    while k < n:
        traj = s + np.cumsum(soc_delta(bat, b[k:], dt))
        bad = np.flatnonzero((traj < lo - 1e-12) | (traj > hi + 1e-12))
        if bad.size == 0:
            socs[k:] = traj
            break
        j = k + int(bad[0])
        if j > k:
            socs[k:j] = traj[: j - k]
            s = float(traj[j - k - 1])
        dis, chg = battery_limits(bat, s, dt)
        b[j] = min(max(req[j], -chg), dis)
        s = min(max(s + soc_delta(bat, b[j], dt), lo), hi)
        socs[j] = s
        k = j + 1
        if k < n and (s <= lo + 1e-9 or s >= hi - 1e-9):
            push = req[k:] > 0 if s <= lo + 1e-9 else req[k:] < 0
            stop = push.size if push.all() else int(np.argmin(push))
            b[k : k + stop] = 0.0
            socs[k : k + stop] = s
            k += stop
    return b, socs


class _Run:
    def __init__(self, cfg: SimConfig, plant: PlantConfig, src_slf: np.ndarray, sched_series: Optional[PowerSeries],
                 start_epoch: float, n_slf: int, socode_enabled: bool):
        self.cfg = cfg
        self.plant = plant
        self.bat = plant.battery
        self.src = src_slf  # (n_sources, n_slf) MW, WTs then PV
        self.sched_series = sched_series
        self.start_epoch = start_epoch
        self.n_slf = n_slf
        self.n_ae = len(plant.aes)
        self.socode_enabled = socode_enabled and plant.socode.enabled
        self.table = plant.socode.table() if self.socode_enabled else None

        init = cfg.init_states or tuple(SHUTDOWN for _ in plant.aes)
        init_mw = cfg.init_ae_mw or tuple(a.p_min for a in plant.aes)
        self.units = []
        for a, s, p0 in zip(plant.aes, init, init_mw):
            if s == STARTED:
                self.units.append(AEUnit.started(a, min(max(p0, a.p_min), a.p_max)))
            elif s == STANDBY:
                self.units.append(AEUnit.standby(a))
            else:
                self.units.append(AEUnit.shutdown(a))
        self.cmd = [u.state for u in self.units]
        self.base = np.array([u.current_power for u in self.units])
        self.battery = BatteryState(soc=cfg.soc0)
        self.f = self.bat.nominal_f
        self.aux = 0.0
        self.k = 0  # fast-step counter
        self.slf = SlfController(dataclasses.replace(plant.slf, step_s=cfg.slf_s))
        self.next_schedule = 0.0
        self.prev_solution = None
        self.lost = np.zeros(self.src.shape[0])
        self.events = sorted(cfg.events, key=lambda e: e.time)
        self.event_idx = [int(round(e.time / cfg.fast_s)) for e in self.events]
        self.next_event = 0
        self.armed = False
        # emergency response state
        self.so_active = False
        self.so_side = None
        self.so_level = np.full(self.n_ae, np.inf)
        self.so_curtail = np.zeros(self.src.shape[0])
        self.so_in_band = 0.0
        self.ref_slf = self.base.copy()
        self.ref_applied = self.base.copy()
        self.slf_started = np.zeros(len(self.base), dtype=bool)
        # accumulators
        self.h2 = 0.0
        self.throughput = 0.0
        self.transitions = {"up_hot": 0, "up_cold": 0, "down": 0, "to_standby": 0, "sb_to_sp": 0, "trip": 0}
        self.clip_events = 0
        self.clip_power = 0
        self.p_bat_peak = 0.0
        self.clip_soc = 0
        self.e = {"renewable": 0.0, "curtailed": 0.0, "ae": 0.0, "loss": 0.0, "unserved": 0.0}
        self.soc_start = cfg.soc0
        self.soc_lo = self.soc_hi = cfg.soc0
        self.log = []
        self.sched_rows = []
        self.slf_rows = {c: [] for c in SLF_COLUMNS}
        self.ae_rows = []
        self.fast_keep = {c: [] for c in FAST_COLUMNS}
        self.windows = [(e.time - cfg.event_window_s, e.time + cfg.event_window_s) for e in self.events]
        self.max_resid = 0.0

    # -- schedule tier -----------------------------------------------------
    def schedule(self, t0: float):
        cfg, plant = self.cfg, self.plant
        ser = self.sched_series
        periods = min(cfg.window_periods, int(math.floor((ser.duration - t0) / cfg.schedule_s + 1e-9)))
        if periods < 1:
            self._hold(t0, "no forecast data left")
            return
        try:
            fc = make_forecast(ser, self.start_epoch + t0, periods * cfg.schedule_s, cfg.schedule_s,
                               cfg.forecast_mode, cfg.seed, cfg.forecast_sigma)
        except HorizonExceedsData:
            self._hold(t0, "forecast window exceeds data")
            return
        n_wt = fc.per_wt.shape[0]
        wt = np.clip(fc.per_wt - self.lost[:n_wt, None], 0.0, None)
        pv = np.clip(fc.pv - self.lost[n_wt], 0.0, None)
        soc0 = min(max(self.battery.soc, self.bat.soc_min), self.bat.soc_max)
        params = dataclasses.replace(plant.roses, step_s=cfg.schedule_s, horizon_periods=periods,
                                     mip_rel_gap=cfg.mip_rel_gap, tie_break=cfg.tie_break)
        problem = ScheduleProblem(
            n_periods=periods,
            step_s=cfg.schedule_s,
            wt_forecast=wt,
            pv_forecast=pv,
            aes=tuple(plant.aes),
            init_states=tuple(u.state for u in self.units),
            init_downtime=tuple(u.downtime_elapsed if u.state == SHUTDOWN else math.inf for u in self.units),
            battery=self.bat,
            soc0=soc0,
            params=params,
        )
        warm = self.prev_solution if self.prev_solution is not None and self.prev_solution.n_periods == periods else None
        try:
            sol = solve_schedule(problem, warm_start=warm)
        except (Infeasible, SolverTimeout) as exc:
            self._hold(t0, f"{exc.code}: {exc}")
            return
        self.prev_solution = sol
        states, base = sol.first_period_commands()
        self.cmd = states
        self.base = _even_split(self.plant.aes, states, base)
        self.sched_rows.append({
            "t": t0, "status": "ok", "objective": sol.objective, "gap": sol.gap, "periods": periods,
            "commands": _letters(states),
            "baseline_mw": [float(x) for x in base],
            "planned_curtailment_mw": float(sol.wt_cut[:, 0].sum() + sol.pv_cut[0]),
        })

    def _hold(self, t0, why):
        self.log.append({"t": t0, "kind": "schedule_hold", "detail": why})
        self.sched_rows.append({
            "t": t0, "status": "hold", "objective": float("nan"), "gap": float("nan"), "periods": 0,
            "commands": _letters(self.cmd),
            "baseline_mw": [float(x) for x in self.base], "planned_curtailment_mw": float("nan"),
        })

    # -- helpers ------------------------------------------------------------
    def _available(self, j: int) -> np.ndarray:
        return np.clip(self.src[:, j] - self.lost, 0.0, None)

    def _effective_cmd(self, i: int) -> str:
        u, c = self.units[i], self.cmd[i]
        if u.state == SHUTDOWN and c == STANDBY:
            return SHUTDOWN
        if u.state == SHUTDOWN and c == STARTED and u.downtime_elapsed < u.params.min_down_s:
            return SHUTDOWN
        return c

    def _apply_event(self, ev: EmergencyEvent, j: int):
        t = float(self.k * self.cfg.fast_s)
        if ev.lost_power <= 0:
            self.log.append({"t": t, "kind": "event", "detail": f"null {ev.side} event"})
            return
        self.armed = True
        if ev.side == SOURCE:
            avail = self._available(j)
            take = min(ev.lost_power, avail[ev.unit_id])
            self.lost[ev.unit_id] += take
            self.log.append({"t": t, "kind": "event", "detail": f"source {ev.unit_id} lost {take:.6g} MW"})
        else:
            u = self.units[ev.unit_id]
            self.units[ev.unit_id] = AEUnit(u.params, SHUTDOWN, 0.0, 0.0, "trip")
            self.cmd[ev.unit_id] = SHUTDOWN
            self.transitions["trip"] += 1
            self.log.append({"t": t, "kind": "event", "detail": f"AE {ev.unit_id} tripped at {u.current_power:.6g} MW"})

    # -- SLF tier -------------------------------------------------------------
    def slf_update(self, j: int):
        avail = float(self._available(j).sum())
        view = []
        for i, u in enumerate(self.units):
            if u.state == STARTED and self._effective_cmd(i) == STARTED:
                view.append(u)
            else:
                view.append(AEUnit.shutdown(u.params))
        measured = sum(u.current_power for u in self.units)
        held_back = float(np.sum(np.maximum(self.ref_slf - self.ref_applied, 0.0)))
        started = np.array([v.state == STARTED for v in view])
        both = started & self.slf_started
        power = np.array([u.current_power for u in self.units])
        shortfall = float(np.sum((self.ref_applied - power)[both]))
        self.slf_started = started
        base = np.where(started, self.base, 0.0)
        ref, _, _ = self.slf.step(avail, measured + held_back, self.battery.soc, base, view, shortfall)
        for i, u in enumerate(self.units):
            if view[i].state != STARTED:
                ref[i] = min(max(self.base[i], u.params.p_min), u.params.p_max)
        self.ref_slf = ref
        if self.so_active and self.so_side == LOAD:
            started = np.array([v.state == STARTED for v in view])
            if np.all(ref[started] <= self.so_level[started] + 1e-9):
                self._socode_exit("load correction caught up")
        self.ref_applied = np.minimum(ref, self.so_level) if (self.so_active and self.so_side == LOAD) else ref.copy()

    # -- emergency response ------------------------------------------------------
    def _socode_enter(self, match, j: int, t: float):
        side = LOAD if match.direction == "under" else SOURCE
        try:
            if side == LOAD:
                resp = apply_emergency_response(match, LOAD, self.units)
            else:
                avail = self._available(j)
                resp = apply_emergency_response(match, SOURCE, avail)
        except InsufficientHeadroom as exc:
            resp = exc.commands
            self.log.append({"t": t, "kind": "socode_partial", "detail": f"executed {exc.executed_mw:.6g} MW"})
        self.so_active = True
        self.so_side = side
        self.so_in_band = 0.0
        if side == LOAD:
            cur = np.array([u.current_power for u in self.units])
            lvl = np.where(resp.commands < 0, cur + resp.commands, np.inf)
            self.so_level = lvl
            self.ref_applied = np.minimum(self.ref_slf, lvl)
        else:
            self.so_curtail = np.asarray(resp.commands, float)
        self.log.append({"t": t, "kind": "socode_on", "detail": f"{match.level} {match.direction} {match.power_step} MW on {side}"})

    def _socode_exit(self, why: str):
        t = float(self.k * self.cfg.fast_s)
        self.so_active = False
        self.so_side = None
        self.so_level = np.full(self.n_ae, np.inf)
        self.so_curtail = np.zeros_like(self.so_curtail)
        self.ref_applied = self.ref_slf.copy()
        self.log.append({"t": t, "kind": "socode_off", "detail": why})

    # -- fast tier ------------------------------------------------------------------
    def segment(self, j: int, n: int):
        """Advance up to ``n`` fast steps with fixed references. Returns the
        number of steps committed and the per-step arrays."""
        cfg, bat = self.cfg, self.bat
        dt = cfg.fast_s
        cmds = [self._effective_cmd(i) for i in range(self.n_ae)]
        P = _fleet_profile(self.units, self.ref_applied, cmds, n, dt)
        ae_tot = P.sum(axis=0)
        avail = self._available(j)
        so_cut = np.minimum(self.so_curtail, avail) if self.so_active and self.so_side == SOURCE else np.zeros_like(avail)
        supply = float(avail.sum() - so_cut.sum())
        req = ae_tot - supply  # discharge-positive battery request

        pmax = bat.p_max if bat.capacity_mwh > 0 else 0.0
        b, socs = _battery_path(bat, self.battery.soc, req, dt)
        cut = np.where(req < 0, b - req, 0.0)
        unserved = np.where(req > 0, req - b, 0.0)
        # clips: the battery hit its power rating, or ran empty while short.
        # Spilling a surplus into a full battery is ordinary curtailment.
        at_rating = np.abs(b) >= pmax - 1e-12
        short = unserved > 1e-9
        spill = (cut > 1e-9) & (pmax > 0)
        clip_power = (short | spill) & at_rating
        clip_soc = short & ~at_rating
        clipped = clip_power | clip_soc

        # frequency: droop set point plus unserved-power deviation, first-order lag
        a_aux = math.exp(-dt / cfg.tau_aux)
        u_aux = -cfg.aux_gain * unserved
        aux, _ = lfilter([1 - a_aux], [1, -a_aux], u_aux, zi=[a_aux * self.aux])
        target = bat.nominal_f - bat.gain_f * b + aux
        a_f = math.exp(-dt / cfg.tau_f)
        f, _ = lfilter([1 - a_f], [1, -a_f], target, zi=[a_f * self.f])
        f_prev = np.concatenate([[self.f], f[:-1]])

        stop = n
        activation = None
        if self.socode_enabled and self.armed and not self.so_active:
            cand = np.flatnonzero(np.abs(target - f_prev) / cfg.tau_f >= self._rocof_floor)
            for k in cand:
                lo, hi = min(f_prev[k], target[k]), max(f_prev[k], target[k])
                if lo > self._under_top and hi < self._over_bottom:
                    continue
                hit = first_activation(f_prev[k], target[k], cfg.tau_f, dt, self.table)
                if hit is not None:
                    stop, activation = k + 1, hit[1]
                    break
        exit_at = None
        if self.so_active:
            inband = np.abs(f - bat.nominal_f) <= self.plant.socode.exit_band_hz
            run = self.so_in_band
            for k in range(n):
                run = run + dt if inband[k] else 0.0
                if run >= self.plant.socode.exit_hold_s - 1e-9:
                    exit_at = k + 1
                    break
            if exit_at is not None and exit_at < stop:
                stop = exit_at
            self.so_in_band = run

        m = stop
        self._commit(j, m, P[:, :m], b[:m], socs[:m], cut[:m], unserved[:m], (clip_power[:m], clip_soc[:m]), aux[:m], f[:m],
                     f_prev[:m], avail, so_cut, cmds)
        if activation is not None:
            self._socode_enter(activation, j, float(self.k * dt))
        elif exit_at is not None and exit_at == m:
            self._socode_exit("frequency settled")
        return m

    def _commit(self, j, m, P, b, socs, cut, unserved, clipped, aux, f, f_prev, avail, so_cut, cmds):
        cfg, bat = self.cfg, self.bat
        dt = cfg.fast_s
        dur = m * dt
        for i, u in enumerate(self.units):
            try:
                nu, _, h2 = ae_step(u, self.ref_applied[i], cmds[i], dur)
            except (MinDownViolation, IllegalTransition):
                nu, _, h2 = ae_step(u, 0.0, SHUTDOWN if u.state != STANDBY else STANDBY, dur)
            if nu.last_transition in self.transitions:
                self.transitions[nu.last_transition] += 1
            self.units[i] = nu
            self.h2 += h2
        q = sum(ae_reactive_power(P[i], u.params.power_factor) for i, u in enumerate(self.units)) if self.n_ae else np.zeros(m)
        q = np.asarray(q, float) * np.ones(m)
        v = bat.nominal_v - bat.gain_v * q
        t = (self.k + 1 + np.arange(m)) * dt
        rocof = (f - f_prev) / dt

        loss = np.where(b > 0, b / bat.efficiency - b, -b * (1 - bat.efficiency)) if bat.capacity_mwh > 0 else np.zeros(m)
        self.e["renewable"] += float(avail.sum()) * dur
        self.e["curtailed"] += float(so_cut.sum()) * dur + float(cut.sum()) * dt
        self.e["ae"] += float(P.sum()) * dt
        self.e["loss"] += float(loss.sum()) * dt
        self.e["unserved"] += float(unserved.sum()) * dt
        self.throughput += float(np.abs(b).sum()) * dt / 3600.0
        if m:
            self.p_bat_peak = max(self.p_bat_peak, float(np.abs(b).max()))
        clip_power, clip_soc = clipped
        clipped = clip_power | clip_soc
        self.clip_events += int(clipped.sum())
        self.clip_power += int(clip_power.sum())
        self.clip_soc += int(clip_soc.sum())
        resid = avail.sum() - so_cut.sum() - cut + b - P.sum(axis=0) - unserved
        self.max_resid = max(self.max_resid, float(np.max(np.abs(resid))) if m else 0.0)

        if m:
            self.battery = BatteryState(soc=float(socs[-1]), power=float(b[-1]), reactive_power=float(q[-1]),
                                        cumulative_throughput=self.throughput)
            self.soc_lo = min(self.soc_lo, float(socs.min()))
            self.soc_hi = max(self.soc_hi, float(socs.max()))
            self.f = float(f[-1])
            self.aux = float(aux[-1])
        self.k += m
        self._seg.append({
            "t": t, "f": f, "v": v, "rocof": rocof, "p_bat": b, "q_bat": q, "soc": socs,
            "cut": cut + so_cut.sum(), "unserved": unserved, "ae": P.sum(axis=0), "clipped": clipped,
        })

    def _thresholds(self):
        rows = self.table.rows if self.table else ()
        ur = [abs(x) for r in rows for x in (r.under_rocof.hi, r.over_rocof.lo) if x is not None]
        self._rocof_floor = min(ur) if ur else math.inf
        self._under_top = max((r.under_frequency.hi for r in rows if r.under_frequency.hi is not None), default=-math.inf)
        self._over_bottom = min((r.over_frequency.lo for r in rows if r.over_frequency.lo is not None), default=math.inf)

    def _in_window(self, t: np.ndarray) -> np.ndarray:
        keep = np.zeros(t.shape, bool)
        for a, b in self.windows:
            keep |= (t >= a) & (t <= b)
        return keep

    def run(self):
        cfg = self.cfg
        self._thresholds()
        nf = cfg.fast_per_slf
        for j in range(self.n_slf):
            t0 = self.k * cfg.fast_s
            while self.next_event < len(self.events) and self.event_idx[self.next_event] <= self.k:
                self._apply_event(self.events[self.next_event], j)
                self.next_event += 1
            if cfg.use_schedule and t0 >= self.next_schedule - 1e-9:
                self.schedule(t0)
                self.next_schedule += cfg.schedule_s
            self.slf_update(j)
            self._seg = []
            end = self.k + nf
            while self.k < end:
                limit = end
                if self.next_event < len(self.events):
                    ke = self.event_idx[self.next_event]
                    if self.k < ke < end:
                        limit = ke
                    elif ke <= self.k:
                        self._apply_event(self.events[self.next_event], j)
                        self.next_event += 1
                        continue
                self.segment(j, limit - self.k)
            self._record_slf(j, t0)
        return self._trace()

    def _record_slf(self, j, t0):
        cat = {k: np.concatenate([s[k] for s in self._seg]) for k in self._seg[0]}
        dt = self.cfg.fast_s
        row = self.slf_rows
        avail = float(self._available(j).sum())
        f, v, t = cat["f"], cat["v"], cat["t"]
        row["t"].append(t0)
        row["available"].append(avail)
        row["forecast"].append(self.slf.last_forecast)
        row["curtailment"].append(float(cat["cut"].mean()))
        row["ae_total"].append(float(cat["ae"].mean()))
        row["p_bat"].append(float(cat["p_bat"].mean()))
        row["soc"].append(self.battery.soc)
        row["residual"].append(float(cat["unserved"].mean()))
        row["clipped"].append(int(cat["clipped"].sum()))
        row["h2_kg"].append(self.h2)
        row["socode"].append(int(self.so_active))
        row["f_min"].append(float(f.min()))
        row["f_max"].append(float(f.max()))
        row["f_mean"].append(float(f.mean()))
        row["t_f_min"].append(float(t[f.argmin()]))
        row["t_f_max"].append(float(t[f.argmax()]))
        row["v_min"].append(float(v.min()))
        row["v_max"].append(float(v.max()))
        row["v_mean"].append(float(v.mean()))
        row["t_v_min"].append(float(t[v.argmin()]))
        row["t_v_max"].append(float(t[v.argmax()]))
        self.ae_rows.append([u.current_power for u in self.units])
        env = self.cfg.envelope
        if f.min() < env.f_min or f.max() > env.f_max or v.min() < env.v_min or v.max() > env.v_max:
            self.log.append({"t": t0, "kind": "envelope_breach",
                             "detail": f"f [{f.min():.4f}, {f.max():.4f}] V [{v.min():.4f}, {v.max():.4f}]"})
        mode = self.cfg.record_fast
        if mode == "full":
            keep = np.ones(t.shape, bool)
        elif mode == "events":
            keep = self._in_window(t)
        else:
            keep = np.zeros(t.shape, bool)
        if keep.any():
            for c in FAST_COLUMNS:
                self.fast_keep[c].append(cat[c][keep])

    def _trace(self) -> SimTrace:
        e = self.e
        bat = self.bat
        d_soc = (self.battery.soc - self.soc_start) * bat.capacity_mwh * 3600.0  # MW*s
        lhs = e["renewable"] - e["curtailed"] + e["unserved"]
        rhs = e["ae"] + e["loss"] + d_soc
        scale = max(abs(lhs), abs(rhs), 1e-12)
        fast = {c: (np.concatenate(v) if v else np.zeros(0)) for c, v in self.fast_keep.items()}
        slf = {c: np.asarray(v, float) for c, v in self.slf_rows.items()}
        totals = {
            "hydrogen_kg": self.h2,
            "curtailment_mwh": e["curtailed"] / 3600.0,
            "renewable_mwh": e["renewable"] / 3600.0,
            "ae_energy_mwh": e["ae"] / 3600.0,
            "battery_loss_mwh": e["loss"] / 3600.0,
            "unserved_mwh": e["unserved"] / 3600.0,
            "delta_soc_mwh": d_soc / 3600.0,
            "energy_audit_rel_error": abs(lhs - rhs) / scale,
            "throughput_mwh": self.throughput,
            "p_bat_peak_mw": self.p_bat_peak,
            "transitions": dict(self.transitions),
            "clip_events": self.clip_events,
            "clip_power": self.clip_power,
            "clip_soc": self.clip_soc,
            "soc_start": self.soc_start,
            "soc_min": self.soc_lo,
            "soc_max": self.soc_hi,
            "max_balance_residual_mw": self.max_resid,
            "schedule_holds": sum(1 for r in self.sched_rows if r["status"] == "hold"),
            "duration_s": self.k * self.cfg.fast_s,
        }
        return SimTrace(fast=fast, slf=slf, ae_power=np.asarray(self.ae_rows, float).reshape(-1, self.n_ae),
                        schedule=self.sched_rows, events=self.log, totals=totals,
                        nominal_f=bat.nominal_f, nominal_v=bat.nominal_v)


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def _slf_sources(power: PowerSeries, cfg: SimConfig, n_slf: int) -> np.ndarray:
    """Per-source power at SLF resolution, interpolated at step midpoints."""
    src = np.vstack([power.per_wt, power.pv[None, :]]) if power.per_wt.size else power.pv[None, :]
    t_data = np.arange(len(power)) * power.step
    mids = (np.arange(n_slf) + 0.5) * cfg.slf_s
    return np.vstack([np.interp(mids, t_data, row) for row in src])


def run_production_sim(config: SimConfig, meteo: MeteoSeries | PowerSeries, plant: PlantConfig,
                       socode_enabled: bool = True) -> SimTrace:
    """Simulate ``config.horizon_s`` seconds of operation from the start of the data."""
    power = meteo if isinstance(meteo, PowerSeries) else to_power_series(meteo, plant.wts, plant.pv)
    if power.duration + 1e-9 < config.horizon_s:
        raise PreconditionError("meteorological data shorter than the horizon",
                                data_s=power.duration, horizon_s=config.horizon_s)
    n_slf = int(math.floor(config.horizon_s / config.slf_s + 1e-9))
    src = _slf_sources(power, config, n_slf)
    run = _Run(config, plant, src, power if config.use_schedule else None, power.start_epoch, n_slf, socode_enabled)
    return run.run()


@dataclass(frozen=True)
class EmergencyScenario:
    """Steady pre-event operating point for unit-loss tests."""

    wt_mw: tuple = (6.25, 6.25, 2.5)
    pv_mw: float = 0.0
    ae_mw: Optional[tuple] = None  # None: renewable split evenly over the AEs
    soc0: float = 0.5


def run_emergency_test(config: SimConfig, plant: PlantConfig, event: EmergencyEvent, socode_enabled: bool,
                       scenario: EmergencyScenario | None = None) -> SimTrace:
    """Constant-renewable run from steady state with one scripted unit loss."""
    sc = scenario or EmergencyScenario()
    if not 0 <= event.time <= config.horizon_s:
        raise PreconditionError("event time outside the horizon", time=event.time, horizon_s=config.horizon_s)
    total = sum(sc.wt_mw) + sc.pv_mw
    ae_mw = sc.ae_mw or tuple(total / len(plant.aes) for _ in plant.aes)
    cfg = dataclasses.replace(config, events=(event,), use_schedule=False, soc0=sc.soc0,
                              init_states=tuple(STARTED for _ in plant.aes))
    n_slf = int(math.floor(cfg.horizon_s / cfg.slf_s + 1e-9))
    src = np.tile(np.array(list(sc.wt_mw) + [sc.pv_mw], float)[:, None], (1, n_slf))
    run = _Run(cfg, plant, src, None, 0.0, n_slf, socode_enabled)
    run.units = [AEUnit.started(a, p) for a, p in zip(plant.aes, ae_mw)]
    run.cmd = [STARTED] * len(plant.aes)
    run.base = np.array(ae_mw, float)
    run.ref_slf = run.base.copy()
    run.ref_applied = run.base.copy()
    run.slf_started = np.zeros(len(run.base), dtype=bool)
    # steady state: history full, integral cancelling the rectifier offset
    st = run.slf.state
    for _ in range(plant.slf.q):
        st.observe(total)
    st.prev_forecast = total
    ks, ki = plant.slf.slope(sc.soc0), plant.slf.k_i
    corr0 = total - float(run.base.sum())
    if ks > 0 and ki > 0:
        st.integral = (corr0 - plant.slf.beta) / (ks * ki)
    return run.run()


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (list, tuple)):
        return " ".join(_fmt(v) for v in x)
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_trace(trace: SimTrace, out_dir, envelope: Envelope | None = None) -> dict:
    """Write fast.csv, slf.csv, schedule.csv, events.csv and summary.json.

    Column order: FAST_COLUMNS; SLF_COLUMNS followed by ae_0..ae_{n-1};
    SCHEDULE_COLUMNS; events as t, kind, detail.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fast_rows = zip(*[trace.fast[c] for c in FAST_COLUMNS]) if trace.fast["t"].size else []
    n_ae = trace.ae_power.shape[1] if trace.ae_power.ndim == 2 else 0
    slf_hdr = list(SLF_COLUMNS) + [f"ae_{i}" for i in range(n_ae)]
    slf_rows = (
        [trace.slf[c][k] for c in SLF_COLUMNS] + list(trace.ae_power[k]) for k in range(trace.n_slf)
    )
    files = {
        "fast.csv": _csv_text(FAST_COLUMNS, fast_rows),
        "slf.csv": _csv_text(slf_hdr, slf_rows),
        "schedule.csv": _csv_text(SCHEDULE_COLUMNS, ([r[c] for c in SCHEDULE_COLUMNS] for r in trace.schedule)),
        "events.csv": _csv_text(("t", "kind", "detail"), ([e["t"], e["kind"], e["detail"]] for e in trace.events)),
        "summary.json": json.dumps(_jsonable(trace.summary(envelope)), indent=2, sort_keys=True) + "\n",
    }
    for name, text in files.items():
        (out / name).write_text(text)
    return {name: str(out / name) for name in files}


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        x = float(v)
        return x if math.isfinite(x) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_trace(out_dir) -> SimTrace:
    """Inverse of write_trace (summary-level totals come from summary.json)."""
    out = Path(out_dir)

    def rows(name):
        with (out / name).open(newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            return header, list(r)

    h, fr = rows("fast.csv")
    fast = {c: np.array([float(x[k]) for x in fr]) for k, c in enumerate(h)}
    h, sr = rows("slf.csv")
    n_base = len(SLF_COLUMNS)
    slf = {c: np.array([float(x[k]) for x in sr]) for k, c in enumerate(h[:n_base])}
    ae = np.array([[float(v) for v in x[n_base:]] for x in sr]).reshape(len(sr), len(h) - n_base)
    h, cr = rows("schedule.csv")
    sched = []
    for x in cr:
        d = dict(zip(h, x))
        sched.append({
            "t": float(d["t"]), "status": d["status"], "objective": float(d["objective"]), "gap": float(d["gap"]),
            "periods": int(d["periods"]), "commands": d["commands"],
            "baseline_mw": [float(v) for v in d["baseline_mw"].split()],
            "planned_curtailment_mw": float(d["planned_curtailment_mw"]),
        })
    h, er = rows("events.csv")
    events = [{"t": float(x[0]), "kind": x[1], "detail": x[2]} for x in er]
    summary = json.loads((out / "summary.json").read_text())
    return SimTrace(fast=fast, slf=slf, ae_power=ae, schedule=sched, events=events, totals=summary)
