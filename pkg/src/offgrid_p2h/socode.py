"""Emergency continuous-operation logic: severity lookup on (frequency, RoCoF)
and a stepped power reduction on the loads or the sources."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, InsufficientHeadroom, InsufficientSamples
from .plant import STARTED
from .slf import allocate

SOURCE = "source"
LOAD = "load"


@dataclass(frozen=True)
class Band:
    """Interval with independently open/closed ends; None means unbounded."""

    lo: Optional[float]
    hi: Optional[float]
    lo_closed: bool = True
    hi_closed: bool = False

    def contains(self, x: float) -> bool:
        if self.lo is not None and (x < self.lo or (x == self.lo and not self.lo_closed)):
            return False
        if self.hi is not None and (x > self.hi or (x == self.hi and not self.hi_closed)):
            return False
        return True

    def disjoint(self, other: "Band") -> bool:
        # self entirely below other, or above it
        def below(a, b):
            if a.hi is None or b.lo is None:
                return False
            return a.hi < b.lo or (a.hi == b.lo and not (a.hi_closed and b.lo_closed))

        return below(self, other) or below(other, self)

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "lo_closed": self.lo_closed, "hi_closed": self.hi_closed}

    @classmethod
    def from_dict(cls, d: dict) -> "Band":
        return cls(d["lo"], d["hi"], bool(d["lo_closed"]), bool(d["hi_closed"]))


@dataclass(frozen=True)
class SeverityRow:
    level: str
    power_step: float  # MW
    under_frequency: Band
    under_rocof: Band
    over_frequency: Band
    over_rocof: Band

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "power_step": self.power_step,
            "under_frequency": self.under_frequency.to_dict(),
            "under_rocof": self.under_rocof.to_dict(),
            "over_frequency": self.over_frequency.to_dict(),
            "over_rocof": self.over_rocof.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeverityRow":
        return cls(
            d["level"],
            float(d["power_step"]),
            Band.from_dict(d["under_frequency"]),
            Band.from_dict(d["under_rocof"]),
            Band.from_dict(d["over_frequency"]),
            Band.from_dict(d["over_rocof"]),
        )


@dataclass(frozen=True)
class SeverityMatch:
    level: str
    power_step: float
    direction: str  # "under" or "over" frequency


@dataclass(frozen=True)
class SeverityTable:
    rows: tuple
    nominal_hz: float = 50.0

    def __post_init__(self):
        steps = [r.power_step for r in self.rows]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ConfigError("power steps must increase strictly with severity", steps=steps)
        for i, a in enumerate(self.rows):
            for b in self.rows[i + 1 :]:
                for fa, ra, fb, rb in (
                    (a.under_frequency, a.under_rocof, b.under_frequency, b.under_rocof),
                    (a.over_frequency, a.over_rocof, b.over_frequency, b.over_rocof),
                ):
                    if not (fa.disjoint(fb) or ra.disjoint(rb)):
                        raise ConfigError("severity rows overlap", rows=[a.level, b.level])

    def classify(self, f: float, rocof: float) -> Optional[SeverityMatch]:
        for r in self.rows:
            if r.under_frequency.contains(f) and r.under_rocof.contains(rocof):
                return SeverityMatch(r.level, r.power_step, "under")
            if r.over_frequency.contains(f) and r.over_rocof.contains(rocof):
                return SeverityMatch(r.level, r.power_step, "over")
        return None

    def to_dict(self) -> dict:
        return {
            "units": {"frequency": "Hz", "rocof": "Hz/s", "power_step": "MW"},
            "nominal_hz": self.nominal_hz,
            "rows": [r.to_dict() for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "SeverityTable":
        try:
            rows = tuple(SeverityRow.from_dict(r) for r in d["rows"])
        except (KeyError, TypeError) as exc:
            raise ConfigError("malformed severity table", detail=str(exc)) from exc
        return cls(rows, float(d.get("nominal_hz", 50.0)))

    @classmethod
    def from_json(cls, text: str) -> "SeverityTable":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path=None) -> "SeverityTable":
        if path is None:
            text = resources.files("offgrid_p2h").joinpath("data/severity_table.json").read_text()
        else:
            text = Path(path).read_text()
        return cls.from_json(text)


def default_table() -> SeverityTable:
    return SeverityTable.load()


@dataclass(frozen=True)
class EmergencyEvent:
    time: float  # s
    side: str  # side that lost the unit: "source" or "load"
    lost_power: float  # MW; zero gives a null event
    unit_id: int = 0

    def __post_init__(self):
        if self.side not in (SOURCE, LOAD):
            raise ValueError("event side must be 'source' or 'load'")
        if self.lost_power < 0:
            raise ValueError("lost power must be non-negative")

    @property
    def response_side(self) -> str:
        """Lost generation is answered by shedding load, lost load by curtailing sources."""
        return LOAD if self.side == SOURCE else SOURCE


@dataclass(frozen=True)
class SocodeParams:
    enabled: bool = True
    exit_band_hz: float = 0.05
    exit_hold_s: float = 2.0
    table_path: Optional[str] = None

    def table(self) -> SeverityTable:
        return SeverityTable.load(self.table_path)


def estimate_rocof(times, freqs, window: float) -> float:
    """Least-squares slope (Hz/s) of the samples in the trailing window."""
    t = np.asarray(times, dtype=float)
    f = np.asarray(freqs, dtype=float)
    if t.size:
        keep = t >= t[-1] - window - 1e-12
        t, f = t[keep], f[keep]
    if t.size < 2:
        raise InsufficientSamples("RoCoF needs at least two samples in the window", samples=int(t.size))
    tc = t - t.mean()
    return float((tc * (f - f.mean())).sum() / (tc * tc).sum())


def classify_severity(f: float, rocof: float, table: Optional[SeverityTable] = None) -> Optional[SeverityMatch]:
    return (table or default_table()).classify(f, rocof)


@dataclass(frozen=True)
class EmergencyResponse:
    side: str
    requested_mw: float
    executed_mw: float
    commands: np.ndarray  # per AE load change (negative) or per source curtailment (positive)


def _split_capped(total: float, weights: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Proportional split of ``total`` with per-entry caps, spilling any excess
    onto entries that still have room."""
    out = np.zeros_like(caps)
    left = total
    active = (caps > 0) & (weights > 0)
    while left > 1e-12 and active.any():
        share = np.where(active, weights, 0.0)
        share = share / share.sum() * left
        room = caps - out
        take = np.minimum(share, room)
        out += take
        left -= take.sum()
        active &= (caps - out) > 1e-12
    return out


def apply_emergency_response(level, side: str, fleet) -> EmergencyResponse:
    """Commands for a severity level.

    ``side`` is where the response acts. On the load side ``fleet`` is the AE
    units and each started unit sheds down to its minimum load, split as in
    load following. On the source side ``fleet`` holds current source outputs
    in MW and curtailment is split pro rata. Partial execution raises
    InsufficientHeadroom carrying the executed commands.
    """
    step = float(getattr(level, "power_step", level))
    if side == LOAD:
        started = np.array([u.state == STARTED for u in fleet])
        room = np.array([max(u.current_power - u.params.p_min, 0.0) if s else 0.0 for u, s in zip(fleet, started)])
        if room.sum() <= 0:
            cuts = np.zeros(len(fleet))
        else:
            weights = -allocate(-1.0, fleet)
            cuts = _split_capped(step, weights, room)
        commands = -cuts
        executed = float(cuts.sum())
    elif side == SOURCE:
        avail = np.maximum(np.asarray(fleet, dtype=float), 0.0)
        commands = _split_capped(step, avail.copy(), avail) if avail.sum() > 0 else np.zeros_like(avail)
        executed = float(commands.sum())
    else:
        raise ValueError("side must be 'source' or 'load'")
    resp = EmergencyResponse(side, step, executed, commands)
    if executed < step - 1e-9:
        raise InsufficientHeadroom(
            "not enough adjustable capacity for the requested step",
            executed_mw=executed,
            commands=resp,
            requested_mw=step,
        )
    return resp


def first_activation(f_start: float, f_target: float, tau: float, horizon: float, table: SeverityTable):
    """Earliest time at which a first-order frequency transient enters a
    severity row.

    With f(t) = T + (f0 - T) exp(-t / tau) the trajectory in the
    (f, RoCoF) plane is the segment RoCoF = (T - f) / tau, so each row
    reduces to an interval of f and hence of t. Returns (t, match) or None.
    """
    if tau <= 0 or f_start == f_target or horizon <= 0:
        return None
    d0 = f_start - f_target
    f_end = f_target + d0 * math.exp(-horizon / tau)
    f_lo, f_hi = min(f_start, f_end), max(f_start, f_end)

    def f_at(t):
        return f_target + d0 * math.exp(-t / tau)

    def t_at(f):
        r = (f - f_target) / d0
        if r <= 0:
            return math.inf
        return max(0.0, -tau * math.log(min(r, 1.0)))

    candidates = {0.0}
    for row in table.rows:
        for fb, rb in ((row.under_frequency, row.under_rocof), (row.over_frequency, row.over_rocof)):
            ends = [fb.lo, fb.hi]
            # RoCoF limits map to f through the segment equation
            ends += [f_target - tau * x for x in (rb.lo, rb.hi) if x is not None]
            for f in ends:
                if f is not None and f_lo <= f <= f_hi:
                    candidates.add(t_at(f))
    best = None
    for t in sorted(candidates):
        for tt in (t, t + 1e-9 * tau):
            if tt > horizon:
                continue
            f = f_at(tt)
            m = table.classify(f, (f_target - f) / tau)
            if m is not None:
                best = (tt, m)
                break
        if best is not None:
            break
    return best
