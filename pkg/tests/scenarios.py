"""Sizing scenario where the AE fleet's ramp limit decides the battery size.

Supply on one turbine surges 9 -> 13 MW and back every 5 minutes (60 s
edges). Four started AEs follow it at a per-unit ramp of a few kW/s, so the
battery carries whatever the fleet cannot track within one SLF step.
"""

import dataclasses

from offgrid_p2h.cli import _sizing_for_step
from offgrid_p2h.config import SimConfig, default_plant
from offgrid_p2h.simulator import EmergencyScenario
from offgrid_p2h.sizing import SizingConfig
from offgrid_p2h.socode import SOURCE, EmergencyEvent
from offgrid_p2h.synth import trapezoid_pulses

HORIZON_S = 1800.0
SLF_STEPS = (5.0, 10.0, 15.0)
RAMPS = (0.006, 0.0075, 0.01)  # MW/s per AE

SUPPLY = trapezoid_pulses(2 * HORIZON_S)
_START = dict(window_periods=6, init_states=("started",) * 4,
              init_ae_mw=(float(SUPPLY.per_wt[0].mean()) / 4,) * 4, record_fast="none")

SIZING = SizingConfig(
    s_init=0.5,
    delta_s=0.1,
    max_iter=30,
    gfm_sim=SimConfig(horizon_s=HORIZON_S, **_START),
    gfm_day_starts=(0.0,),
    code_sim=SimConfig(horizon_s=60.0, record_fast="none"),
    code_scenario=EmergencyScenario(wt_mw=(6.0, 4.0, 2.0), ae_mw=(3.0,) * 4),
    events=(EmergencyEvent(10.0, SOURCE, 1.0, 2),),
    balance_sim=SimConfig(horizon_s=HORIZON_S, **_START),
)


def case(slf_s: float, ramp: float):
    """(sizing config, plant, supply) for one grid cell."""
    return _sizing_for_step(SIZING, slf_s), default_plant().with_ae(ramp_mw_s=ramp), SUPPLY


def with_sizing(**changes):
    return dataclasses.replace(SIZING, **changes)
