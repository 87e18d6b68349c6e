"""Plant and simulation configuration, with JSON (de)serialization.

Every config is a frozen dataclass; ``to_dict``/``from_dict`` walk the
dataclass fields, so JSON files mirror the attribute names one-to-one.
"""

from __future__ import annotations

import dataclasses
import json
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .plant import AEParams, BatterySpec, PVArray, WindTurbine
from .rose.problem import RosesParams
from .slf import SlfParams
from .socode import EmergencyEvent, SocodeParams


@dataclass(frozen=True)
class Envelope:
    f_min: float = 45.0
    f_max: float = 55.0
    v_min: float = 31.5
    v_max: float = 38.5

    def __post_init__(self):
        if not (self.f_min < self.f_max and self.v_min < self.v_max):
            raise ConfigError("envelope bounds must be ordered", envelope=dataclasses.asdict(self))


@dataclass(frozen=True)
class PlantConfig:
    wts: tuple = (WindTurbine(), WindTurbine(), WindTurbine())
    pv: PVArray = PVArray()
    aes: tuple = tuple(AEParams(standby_mw=0.1) for _ in range(4))
    battery: BatterySpec = BatterySpec(capacity_mwh=3.4)
    roses: RosesParams = RosesParams()
    slf: SlfParams = SlfParams()
    socode: SocodeParams = SocodeParams()

    @property
    def total_ae_mw(self) -> float:
        return sum(a.capacity_mw for a in self.aes)

    def with_battery(self, capacity_mwh: float, c_rate: float | None = None) -> "PlantConfig":
        bat = dataclasses.replace(self.battery, capacity_mwh=capacity_mwh,
                                  c_rate=self.battery.c_rate if c_rate is None else c_rate)
        return dataclasses.replace(self, battery=bat)

    def with_ae(self, **changes) -> "PlantConfig":
        return dataclasses.replace(self, aes=tuple(dataclasses.replace(a, **changes) for a in self.aes))


@dataclass(frozen=True)
class SimConfig:
    horizon_s: float = 7 * 86400.0
    fast_s: float = 0.1
    slf_s: float = 5.0
    schedule_s: float = 300.0
    window_periods: int = 48
    envelope: Envelope = Envelope()
    events: tuple = ()
    seed: int = 0
    forecast_mode: str = "perfect"
    forecast_sigma: float = 0.05
    mip_rel_gap: float = 1e-3
    tie_break: bool = False
    soc0: float = 0.5
    init_states: typing.Optional[tuple] = None  # None: every AE starts shut down
    init_ae_mw: typing.Optional[tuple] = None  # started units' initial power; None: band floor
    tau_f: float = 0.002  # s, frequency lag behind the droop set point
    aux_gain: float = 2.0  # Hz per MW of unserved power
    tau_aux: float = 0.5  # s
    record_fast: str = "events"  # "events", "full" or "none"
    event_window_s: float = 30.0
    use_schedule: bool = True

    def __post_init__(self):
        if not (0 < self.fast_s <= self.slf_s <= self.schedule_s):
            raise ConfigError("need 0 < fast <= slf <= schedule step", fast=self.fast_s, slf=self.slf_s,
                              schedule=self.schedule_s)
        r = self.slf_s / self.fast_s
        if abs(r - round(r)) > 1e-9:
            raise ConfigError("SLF step must be a whole number of fast steps", ratio=r)
        if self.horizon_s <= 0:
            raise ConfigError("horizon must be positive")
        if self.record_fast not in ("events", "full", "none"):
            raise ConfigError("record_fast must be events, full or none")

    @property
    def fast_per_slf(self) -> int:
        return int(round(self.slf_s / self.fast_s))


def reference_emergency_plant() -> PlantConfig:
    """Unit-loss reference case: three 5 MW AEs ramping at 0.5 MW/s and a
    6.8 MW / 3.4 MWh battery."""
    ae = AEParams(standby_mw=0.1, ramp_mw_s=0.5)
    return PlantConfig(aes=(ae, ae, ae), battery=BatterySpec(capacity_mwh=3.4, c_rate=2.0))


def default_plant() -> PlantConfig:
    return PlantConfig(slf=SlfParams(soc_restore_gain=2.0))


# ---------------------------------------------------------------------------
# generic dataclass <-> dict
# ---------------------------------------------------------------------------


def _encode(v):
    if dataclasses.is_dataclass(v):
        return {f.name: _encode(getattr(v, f.name)) for f in dataclasses.fields(v) if not callable(getattr(v, f.name))}
    if isinstance(v, (tuple, list)):
        return [_encode(x) for x in v]
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def to_dict(obj) -> dict:
    return _encode(obj)


_TUPLE_ITEM = {
    ("PlantConfig", "wts"): WindTurbine,
    ("PlantConfig", "aes"): AEParams,
    ("SimConfig", "events"): EmergencyEvent,
}


def _dataclass_of(hint):
    """The dataclass named by a field annotation, unwrapping Optional."""
    if dataclasses.is_dataclass(hint):
        return hint
    for arg in typing.get_args(hint):
        if dataclasses.is_dataclass(arg):
            return arg
    return None


def register_tuple_item(owner: type, name: str, item: type) -> None:
    _TUPLE_ITEM[(owner.__name__, name)] = item


def from_dict(cls, data: dict):
    """Build ``cls`` from a plain dict, recursing into nested dataclasses.

    Missing keys take the dataclass defaults; unknown keys are rejected.
    """
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__} expects an object", got=type(data).__name__)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys", keys=unknown)
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for k, v in data.items():
        item = _TUPLE_ITEM.get((cls.__name__, k))
        nested = _dataclass_of(hints.get(k))
        if v is None:
            kwargs[k] = None
        elif item is not None:
            kwargs[k] = tuple(from_dict(item, x) for x in v)
        elif nested is not None and isinstance(v, dict):
            kwargs[k] = from_dict(nested, v)
        elif isinstance(v, list):
            kwargs[k] = tuple(v)
        elif v in ("inf", "-inf"):
            kwargs[k] = float(v)
        else:
            kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError("config file not found", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config file is not valid JSON", path=str(path), line=exc.lineno) from exc
