"""Device models: wind/PV parameters, alkaline electrolyzer state machine,
battery SOC dynamics, and the algebraic droop map of the grid-forming battery.

Sign conventions: battery power is positive when discharging; AE power is a
load (always >= 0).  Powers in MW, energies in MWh, times in seconds unless a
name says otherwise.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import IllegalTransition, MinDownViolation

STARTED, STANDBY, SHUTDOWN = "started", "standby", "shutdown"
AE_STATES = (STARTED, STANDBY, SHUTDOWN)


@dataclass(frozen=True)
class WindTurbine:
    rating_mw: float = 6.25
    cut_in: float = 3.0
    rated_speed: float = 12.0
    cut_out: float = 25.0


@dataclass(frozen=True)
class PVArray:
    rating_mw: float = 5.0
    temp_coeff: float = -0.004
    noct: float = 45.0


@dataclass(frozen=True)
class EfficiencyCurve:
    """Specific energy consumption of an AE, kWh/kg.

    Either a fixed coefficient or a piecewise-linear map from load fraction
    (power / capacity) to consumption, held flat outside the breakpoints.
    """

    k_h2: float = 55.62
    load_fractions: tuple = ()
    consumption: tuple = ()

    def __post_init__(self):
        if len(self.load_fractions) != len(self.consumption):
            raise ValueError("breakpoint and consumption lists differ in length")
        if any(b <= a for a, b in zip(self.load_fractions, self.load_fractions[1:])):
            raise ValueError("efficiency breakpoints must be strictly increasing")
        if self.k_h2 <= 0 or any(c <= 0 for c in self.consumption):
            raise ValueError("specific consumption must be positive")

    @property
    def is_fixed(self) -> bool:
        return not self.load_fractions

    def specific_consumption(self, power, capacity_mw: float = 1.0):
        if self.is_fixed:
            return np.full_like(np.asarray(power, dtype=float), self.k_h2) if np.ndim(power) else self.k_h2
        frac = np.asarray(power, dtype=float) / capacity_mw
        out = np.interp(frac, self.load_fractions, self.consumption)
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class AEParams:
    standby_mw: float
    capacity_mw: float = 5.0
    r_min: float = 0.10
    r_max: float = 1.20
    ramp_mw_s: float = 0.05
    min_down_s: float = 3600.0
    curve: EfficiencyCurve = field(default_factory=EfficiencyCurve)
    power_factor: float = 0.98

    @property
    def p_min(self) -> float:
        return self.r_min * self.capacity_mw

    @property
    def p_max(self) -> float:
        return self.r_max * self.capacity_mw


@dataclass(frozen=True)
class AEUnit:
    params: AEParams
    state: str = SHUTDOWN
    current_power: float = 0.0
    downtime_elapsed: float = math.inf
    last_transition: Optional[str] = None

    def __post_init__(self):
        if self.state not in AE_STATES:
            raise ValueError(f"unknown AE state {self.state!r}")
        p = self.current_power
        if self.state == STARTED and not (self.params.p_min - 1e-9 <= p <= self.params.p_max + 1e-9):
            raise ValueError(f"started AE power {p} outside [{self.params.p_min}, {self.params.p_max}]")
        if self.state == STANDBY and abs(p - self.params.standby_mw) > 1e-9:
            raise ValueError("standby AE must draw its standby power")
        if self.state == SHUTDOWN and p != 0.0:
            raise ValueError("shutdown AE must draw zero power")

    @classmethod
    def started(cls, params: AEParams, power: float) -> "AEUnit":
        return cls(params, STARTED, power, 0.0)

    @classmethod
    def standby(cls, params: AEParams) -> "AEUnit":
        return cls(params, STANDBY, params.standby_mw, 0.0)

    @classmethod
    def shutdown(cls, params: AEParams, downtime_elapsed: float = math.inf) -> "AEUnit":
        return cls(params, SHUTDOWN, 0.0, downtime_elapsed)

    @property
    def headroom_up(self) -> float:
        return self.params.p_max - self.current_power if self.state == STARTED else 0.0

    @property
    def headroom_down(self) -> float:
        return self.current_power - self.params.p_min if self.state == STARTED else 0.0


def ae_hydrogen_rate(power, state: str, curve: EfficiencyCurve, capacity_mw: float = 1.0):
    """Hydrogen production rate in kg/h; zero unless the unit is started."""
    if state != STARTED:
        return np.zeros_like(np.asarray(power, dtype=float)) if np.ndim(power) else 0.0
    rate = 1000.0 * np.asarray(power, dtype=float) / curve.specific_consumption(power, capacity_mw)
    return float(rate) if np.ndim(rate) == 0 else rate


def ae_reactive_power(power, power_factor: float):
    return np.asarray(power) * math.tan(math.acos(power_factor))


# ---------------------------------------------------------------------------
# Ramp kinematics (shared by ae_step and the vectorized simulator path)
# ---------------------------------------------------------------------------


def ramp_position(p0, target, ramp, t):
    """Power at time ``t`` after moving from ``p0`` toward ``target`` at ``ramp`` MW/s."""
    p0, target, t = np.asarray(p0, float), np.asarray(target, float), np.asarray(t, float)
    return p0 + np.clip(target - p0, -ramp * t, ramp * t)


def ramp_integral(p0, target, ramp, t):
    """Integral of ``ramp_position`` over ``[0, t]`` in MW*s (exact)."""
    p0, target, t = np.asarray(p0, float), np.asarray(target, float), np.asarray(t, float)
    d = np.abs(target - p0)
    sgn = np.sign(target - p0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_star = np.where(ramp > 0, d / np.where(ramp > 0, ramp, 1.0), np.inf)
    moving = np.minimum(t, t_star)
    area = p0 * t + sgn * (0.5 * ramp * moving**2 + np.where(t > t_star, d * (t - t_star), 0.0))
    return area


def _h2_over_ramp(p0: float, target: float, ramp: float, dt: float, params: AEParams) -> float:
    """Hydrogen in kg while a started unit ramps for ``dt`` seconds."""
    if dt <= 0:
        return 0.0
    curve = params.curve
    if curve.is_fixed:
        return float(ramp_integral(p0, target, ramp, dt)) / 3600.0 * 1000.0 / curve.k_h2
    # nonlinear curve: trapezoid on a fine grid over each linear/flat segment
    t_star = min(dt, abs(target - p0) / ramp) if ramp > 0 else 0.0
    total = 0.0
    for a, b in ((0.0, t_star), (t_star, dt)):
        if b - a <= 0:
            continue
        ts = np.linspace(a, b, 33)
        rate = ae_hydrogen_rate(ramp_position(p0, target, ramp, ts), STARTED, curve, params.capacity_mw)
        total += float(np.trapezoid(rate, ts)) / 3600.0
    return total


def ae_step(unit: AEUnit, power_ref: float, state_cmd: Optional[str] = None, dt: float = 1.0):
    """Advance one AE by ``dt`` seconds.

    Returns ``(unit, achieved_power, h2_kg)``.  A start moves the unit to the
    bottom of its band and then ramps; standby/shutdown commands first ramp a
    started unit down to the bottom of its band and switch when it gets there.
    ``unit.last_transition`` records ``up_hot``, ``up_cold``, ``down`` or
    ``to_standby`` when a transition completes in this step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    p = unit.params
    cmd = state_cmd or unit.state
    if cmd not in AE_STATES:
        raise ValueError(f"unknown AE state command {cmd!r}")
    transition = None

    if unit.state == SHUTDOWN:
        if cmd == STANDBY:
            raise IllegalTransition("shutdown -> standby requires a start first", unit_state=unit.state)
        if cmd == SHUTDOWN:
            return dataclasses.replace(unit, downtime_elapsed=unit.downtime_elapsed + dt, last_transition=None), 0.0, 0.0
        if unit.downtime_elapsed < p.min_down_s:
            raise MinDownViolation(
                f"start refused: down for {unit.downtime_elapsed} s of required {p.min_down_s} s",
                downtime_elapsed=unit.downtime_elapsed,
                min_down_s=p.min_down_s,
            )
        unit = dataclasses.replace(unit, state=STARTED, current_power=p.p_min, downtime_elapsed=0.0)
        transition = "up_cold"
    elif unit.state == STANDBY:
        if cmd == STANDBY:
            return dataclasses.replace(unit, last_transition=None), p.standby_mw, 0.0
        if cmd == SHUTDOWN:
            # leaving standby carries no minimum-downtime obligation
            return AEUnit(p, SHUTDOWN, 0.0, math.inf, "sb_to_sp"), 0.0, 0.0
        unit = dataclasses.replace(unit, state=STARTED, current_power=p.p_min)
        transition = "up_hot"

    # unit is started here
    p0 = unit.current_power
    if cmd == STARTED:
        target = min(max(power_ref, p.p_min), p.p_max)
        p1 = float(ramp_position(p0, target, p.ramp_mw_s, dt))
        h2 = _h2_over_ramp(p0, target, p.ramp_mw_s, dt, p)
        return dataclasses.replace(unit, current_power=p1, last_transition=transition), p1, h2

    # ramp down to the band floor, then switch
    target = p.p_min
    t_reach = (p0 - target) / p.ramp_mw_s if p.ramp_mw_s > 0 else (0.0 if p0 <= target + 1e-12 else math.inf)
    if t_reach > dt + 1e-12:
        p1 = float(ramp_position(p0, target, p.ramp_mw_s, dt))
        h2 = _h2_over_ramp(p0, target, p.ramp_mw_s, dt, p)
        return dataclasses.replace(unit, current_power=p1, last_transition=transition), p1, h2
    h2 = _h2_over_ramp(p0, target, p.ramp_mw_s, max(t_reach, 0.0), p)
    if cmd == STANDBY:
        return AEUnit(p, STANDBY, p.standby_mw, 0.0, "to_standby"), p.standby_mw, h2
    return AEUnit(p, SHUTDOWN, 0.0, max(dt - max(t_reach, 0.0), 0.0), "down"), 0.0, h2


# ---------------------------------------------------------------------------
# Battery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BatterySpec:
    capacity_mwh: float
    c_rate: float = 2.0
    efficiency: float = 0.95
    soc_min: float = 0.10
    soc_max: float = 0.90
    droop_gain_f: Optional[float] = None  # Hz per MW; None -> 0.25 Hz at P_max
    droop_gain_v: Optional[float] = None  # kV per MVAr; None -> 1.0 kV at P_max
    nominal_f: float = 50.0
    nominal_v: float = 35.0

    def __post_init__(self):
        if not 0 < self.soc_min < self.soc_max < 1:
            raise ValueError("need 0 < soc_min < soc_max < 1")
        if self.capacity_mwh < 0 or self.c_rate <= 0 or not 0 < self.efficiency <= 1:
            raise ValueError("invalid battery capacity, c-rate or efficiency")

    @property
    def p_max(self) -> float:
        return self.c_rate * self.capacity_mwh

    @property
    def gain_f(self) -> float:
        if self.droop_gain_f is not None:
            return self.droop_gain_f
        return 0.25 / self.p_max if self.p_max > 0 else 0.25

    @property
    def gain_v(self) -> float:
        if self.droop_gain_v is not None:
            return self.droop_gain_v
        return 1.0 / self.p_max if self.p_max > 0 else 1.0


@dataclass(frozen=True)
class BatteryState:
    soc: float = 0.5
    power: float = 0.0
    reactive_power: float = 0.0
    cumulative_throughput: float = 0.0


def battery_limits(spec: BatterySpec, soc: float, dt: float) -> tuple[float, float]:
    """Largest discharge and charge magnitudes (MW) admissible for ``dt`` seconds."""
    if spec.capacity_mwh <= 0:
        return 0.0, 0.0
    h = dt / 3600.0
    e = spec.capacity_mwh
    dis = max(0.0, (soc - spec.soc_min) * spec.efficiency * e / h)
    chg = max(0.0, (spec.soc_max - soc) * e / (spec.efficiency * h))
    return min(spec.p_max, dis), min(spec.p_max, chg)


def soc_delta(spec: BatterySpec, power, dt: float):
    """SOC change for a (signed, discharge-positive) power held ``dt`` seconds."""
    if spec.capacity_mwh <= 0:
        return np.zeros_like(np.asarray(power, float)) if np.ndim(power) else 0.0
    h = dt / 3600.0
    p = np.asarray(power, float)
    d = np.where(p >= 0, -p / spec.efficiency, -p * spec.efficiency) * h / spec.capacity_mwh
    return float(d) if d.ndim == 0 else d


def battery_step(spec: BatterySpec, state: BatteryState, net_power_request: float, dt: float):
    """Serve a discharge-positive power request for ``dt`` seconds.

    Returns ``(state, achieved, clipped)``; the request is clipped to the
    power rating and to whatever keeps SOC inside ``[soc_min, soc_max]``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    dis, chg = battery_limits(spec, state.soc, dt)
    achieved = min(max(net_power_request, -chg), dis)
    clipped = abs(achieved - net_power_request) > 1e-12
    if achieved == 0.0:
        return dataclasses.replace(state, power=0.0), 0.0, clipped
    soc = state.soc + soc_delta(spec, achieved, dt)
    # absorb rounding at the bounds without dragging an out-of-band SOC inside
    soc = min(max(soc, min(spec.soc_min, state.soc)), max(spec.soc_max, state.soc))
    new = dataclasses.replace(
        state,
        soc=soc,
        power=achieved,
        cumulative_throughput=state.cumulative_throughput + abs(achieved) * dt / 3600.0,
    )
    return new, achieved, clipped


def droop_point(spec: BatterySpec, p: float, q: float) -> tuple[float, float]:
    """Steady-state P-f / Q-V droop operating point of the grid-forming battery."""
    return spec.nominal_f - spec.gain_f * p, spec.nominal_v - spec.gain_v * q
