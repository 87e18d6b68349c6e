"""Levelized cost of hydrogen with degradation-driven battery replacement."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .errors import PreconditionError, ZeroHydrogen

HOURS_PER_YEAR = 8760.0


@dataclass(frozen=True)
class DeviceCost:
    unit_cost: float  # CYN/kW, or CYN/kWh for the battery
    om_ratio: float = 0.02
    lifetime_years: float = 20.0

    def __post_init__(self):
        if self.unit_cost < 0 or not 0 <= self.om_ratio <= 1 or self.lifetime_years < 1:
            raise ValueError("unit cost must be >= 0, O&M ratio in [0, 1], lifetime >= 1 year")


@dataclass(frozen=True)
class EconParams:
    wt: DeviceCost = DeviceCost(5000.0)
    pv: DeviceCost = DeviceCost(4000.0)
    ae: DeviceCost = DeviceCost(3500.0)
    battery: DeviceCost = DeviceCost(1500.0)
    discount_rate: float = 0.08
    replacement_cost: float = 900.0  # CYN/kWh
    recycling_revenue: float = 150.0  # CYN/kWh
    max_degradation: float = 0.20
    # throughput + calendar fade model
    fade_per_cycle: float = 0.00005
    calendar_fade: float = 0.015  # per year

    def __post_init__(self):
        if self.discount_rate <= 0:
            raise ValueError("discount rate must be positive")
        if not 0 < self.max_degradation <= 1:
            raise ValueError("max degradation must lie in (0, 1]")


@dataclass(frozen=True)
class CostBreakdown:
    C_inve: float  # CYN/yr
    C_fixed_OM: float  # CYN/yr
    C_vari_OM: float  # CYN/yr, crf times the discounted replacement-minus-recycling sum
    C_rep: float  # CYN, discounted
    C_rec: float  # CYN, discounted
    K_rep: int
    T_Fail: float  # years
    M_H2: float  # kg/yr
    lcoh: float  # CYN/kg
    annual_degradation: float = 0.0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if math.isinf(d["T_Fail"]):
            d["T_Fail"] = "inf"
        return d


def crf(r: float, years: float) -> float:
    """Capital recovery factor."""
    if r <= 0 or years < 1:
        raise ValueError("need r > 0 and at least one year")
    g = (1.0 + r) ** years
    return r * g / (g - 1.0)


def replacement_plan(max_degradation: float, annual_degradation: float, lifetime_years: float) -> tuple[float, int]:
    """(years to failure, number of replacements over the lifetime)."""
    if annual_degradation < 0:
        raise ValueError("annual degradation must be non-negative")
    if annual_degradation == 0:
        return math.inf, 0
    t_fail = max_degradation / annual_degradation
    return t_fail, max(0, math.ceil(lifetime_years / t_fail - 1.0))


def _span_years(trace) -> float:
    span = trace.totals.get("duration_s", 0.0)
    if span <= 0:
        raise PreconditionError("trace has no simulated duration")
    return span / 3600.0 / HOURS_PER_YEAR


def annual_degradation(trace, battery, econ: EconParams = EconParams()) -> float:
    """Cycle fade from equivalent full cycles plus calendar fade, per year."""
    years = _span_years(trace)
    if battery.capacity_mwh <= 0:
        return 0.0
    cycles = trace.totals["throughput_mwh"] / (2.0 * battery.capacity_mwh)
    return cycles / years * econ.fade_per_cycle + econ.calendar_fade


def annual_hydrogen(trace) -> float:
    return trace.totals["hydrogen_kg"] / _span_years(trace)


def installed_capacity_kw(plant) -> dict:
    return {
        "wt": 1000.0 * sum(w.rating_mw for w in plant.wts),
        "pv": 1000.0 * (plant.pv.rating_mw if plant.pv is not None else 0.0),
        "ae": 1000.0 * sum(a.capacity_mw for a in plant.aes),
        "battery": 1000.0 * plant.battery.capacity_mwh,  # kWh
    }


def cost_breakdown(plant, econ: EconParams, m_h2: float, annual_deg: float) -> CostBreakdown:
    """LCOH from annual hydrogen and annual battery degradation."""
    r = econ.discount_rate
    size = installed_capacity_kw(plant)
    inve = fixed = 0.0
    for name in ("wt", "pv", "ae", "battery"):
        dev = getattr(econ, name)
        capex = size[name] * dev.unit_cost
        inve += crf(r, dev.lifetime_years) * capex
        fixed += dev.om_ratio * capex

    life = econ.battery.lifetime_years
    t_fail, k_rep = replacement_plan(econ.max_degradation, annual_deg, life) if size["battery"] > 0 else (math.inf, 0)
    disc = sum((1.0 + r) ** (-k * life / (k_rep + 1)) for k in range(1, k_rep + 1))
    c_rep = size["battery"] * econ.replacement_cost * disc
    c_rec = size["battery"] * econ.recycling_revenue * disc
    vari = crf(r, life) * (c_rep - c_rec)

    if m_h2 <= 0:
        raise ZeroHydrogen("no hydrogen produced; LCOH is undefined", annual_kg=m_h2)
    return CostBreakdown(inve, fixed, vari, c_rep, c_rec, k_rep, t_fail, m_h2, (inve + fixed + vari) / m_h2, annual_deg)


def lcoh(plant, econ: EconParams, trace) -> CostBreakdown:
    return cost_breakdown(plant, econ, annual_hydrogen(trace), annual_degradation(trace, plant.battery, econ))
