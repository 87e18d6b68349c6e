"""Meteorological input: load, validate, resample, convert to power, forecast."""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    HorizonExceedsData,
    IncompatibleStep,
    IrregularStep,
    MissingColumn,
    NegativeValue,
    NonMonotonicTime,
)

DEFAULT_SCHEMA = {
    "epoch": "epoch_s",
    "wind": "wind_ms",  # exact name, or prefix of wind_ms_1, wind_ms_2, ...
    "ghi": "ghi_wm2",
    "temp": "temp_c",
}


@dataclass(frozen=True, eq=False)
class MeteoSeries:
    start_epoch: float
    step: float
    wind_speed: np.ndarray  # (n_columns, N); one column means shared by every turbine
    ghi: np.ndarray
    ambient_temp: np.ndarray

    def __post_init__(self):
        if self.step <= 0:
            raise IrregularStep("step must be positive", step=self.step)
        ws = np.atleast_2d(np.asarray(self.wind_speed, dtype=float))
        object.__setattr__(self, "wind_speed", ws)
        object.__setattr__(self, "ghi", np.asarray(self.ghi, dtype=float))
        object.__setattr__(self, "ambient_temp", np.asarray(self.ambient_temp, dtype=float))
        n = ws.shape[1]
        if len(self.ghi) != n or len(self.ambient_temp) != n:
            raise ValueError("all meteorological sequences must have equal length")
        if (ws < 0).any() or (self.ghi < 0).any():
            raise NegativeValue("wind speed and irradiance must be non-negative")

    def __len__(self) -> int:
        return self.wind_speed.shape[1]

    @property
    def duration(self) -> float:
        return len(self) * self.step

    def wind_for(self, turbine: int) -> np.ndarray:
        if self.wind_speed.shape[0] == 1:
            return self.wind_speed[0]
        return self.wind_speed[turbine]


@dataclass(frozen=True, eq=False)
class PowerSeries:
    start_epoch: float
    step: float
    per_wt: np.ndarray  # (m, N) MW
    pv: np.ndarray  # (N,) MW
    wt_ratings: tuple = field(default=())
    pv_rating: float = float("inf")

    def __post_init__(self):
        object.__setattr__(self, "per_wt", np.atleast_2d(np.asarray(self.per_wt, dtype=float)))
        object.__setattr__(self, "pv", np.asarray(self.pv, dtype=float))
        if not self.wt_ratings:
            object.__setattr__(self, "wt_ratings", (float("inf"),) * self.per_wt.shape[0])

    def __len__(self) -> int:
        return len(self.pv)

    @property
    def total(self) -> np.ndarray:
        return self.per_wt.sum(axis=0) + self.pv

    @property
    def duration(self) -> float:
        return len(self) * self.step


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _wind_columns(header: list[str], wind: str) -> list[str]:
    if wind in header:
        return [wind]
    cols = [h for h in header if h.startswith(wind + "_")]
    return sorted(cols, key=lambda h: int(h.rsplit("_", 1)[1]) if h.rsplit("_", 1)[1].isdigit() else h)


def load_meteo_series(path, schema: dict | None = None) -> MeteoSeries:
    """Read a meteorological CSV and validate it.

    Rows are numbered from 1 (first data row) in error messages.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [r for r in reader if r and any(c.strip() for c in r)]

    wind_cols = _wind_columns(header, schema["wind"])
    if not wind_cols:
        raise MissingColumn(f"missing wind column '{schema['wind']}'", column=schema["wind"])
    for key in ("epoch", "ghi", "temp"):
        if schema[key] not in header:
            raise MissingColumn(f"missing column '{schema[key]}'", column=schema[key])

    idx = {h: i for i, h in enumerate(header)}
    data = {h: np.array([float(r[idx[h]]) for r in rows]) for h in [schema["epoch"], schema["ghi"], schema["temp"], *wind_cols]}
    t = data[schema["epoch"]]
    if len(t) == 0:
        raise IrregularStep("no data rows")

    dt = np.diff(t)
    bad = np.flatnonzero(dt <= 0)
    if bad.size:
        row = int(bad[0]) + 2
        raise NonMonotonicTime(f"timestamp not strictly increasing at row {row}", row=row)
    step = float(dt[0]) if dt.size else 1.0
    bad = np.flatnonzero(np.abs(dt - step) > 1e-9 * max(1.0, step))
    if bad.size:
        row = int(bad[0]) + 2
        raise IrregularStep(f"irregular time step at row {row}", row=row, expected=step, got=float(dt[bad[0]]))

    for col in [schema["ghi"], *wind_cols]:
        neg = np.flatnonzero(data[col] < 0)
        if neg.size:
            row = int(neg[0]) + 1
            raise NegativeValue(f"negative value in '{col}' at row {row}", row=row, column=col)

    return MeteoSeries(
        start_epoch=float(t[0]),
        step=step,
        wind_speed=np.vstack([data[c] for c in wind_cols]),
        ghi=data[schema["ghi"]],
        ambient_temp=data[schema["temp"]],
    )


def write_meteo_csv(series: MeteoSeries, path) -> None:
    n_wind = series.wind_speed.shape[0]
    wind_names = ["wind_ms"] if n_wind == 1 else [f"wind_ms_{k + 1}" for k in range(n_wind)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch_s", *wind_names, "ghi_wm2", "temp_c"])
        for j in range(len(series)):
            w.writerow(
                [repr(series.start_epoch + j * series.step)]
                + [repr(float(series.wind_speed[k, j])) for k in range(n_wind)]
                + [repr(float(series.ghi[j])), repr(float(series.ambient_temp[j]))]
            )


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------


def _resample_array(a: np.ndarray, factor_down: int, factor_up: int, mode: str) -> np.ndarray:
    if factor_down > 1:
        n = a.shape[-1] // factor_down
        trimmed = a[..., : n * factor_down]
        blocks = trimmed.reshape(*a.shape[:-1], n, factor_down)
        return blocks[..., 0].copy() if mode == "hold" else blocks.mean(axis=-1)
    if factor_up > 1:
        return np.repeat(a, factor_up, axis=-1)
    return a.copy()


def _ratio(step: float, target: float) -> tuple[int, int]:
    if abs(target - step) <= 1e-9 * step:
        return 1, 1
    if target > step:
        k = round(target / step)
        if abs(k * step - target) <= 1e-9 * target:
            return k, 1
    else:
        k = round(step / target)
        if abs(k * target - step) <= 1e-9 * step:
            return 1, k
    raise IncompatibleStep(f"target step {target} s is neither a multiple nor a divisor of {step} s", step=step, target=target)


def resample(series, target_step: float, mode: str = "mean"):
    """Change the time step of a MeteoSeries or PowerSeries.

    Downsampling averages complete windows (``mean``) or keeps the first
    sample of each window (``hold``); a trailing partial window is dropped.
    Upsampling repeats each sample.
    """
    if mode not in ("mean", "hold"):
        raise ValueError(f"unknown resample mode {mode!r}")
    down, up = _ratio(series.step, target_step)
    if isinstance(series, MeteoSeries):
        return MeteoSeries(
            start_epoch=series.start_epoch,
            step=float(target_step),
            wind_speed=_resample_array(series.wind_speed, down, up, mode),
            ghi=_resample_array(series.ghi, down, up, mode),
            ambient_temp=_resample_array(series.ambient_temp, down, up, mode),
        )
    return dataclasses.replace(
        series,
        step=float(target_step),
        per_wt=_resample_array(series.per_wt, down, up, mode),
        pv=_resample_array(series.pv, down, up, mode),
    )


# ---------------------------------------------------------------------------
# Power conversion
# ---------------------------------------------------------------------------


def wind_power(speed, wt) -> np.ndarray | float:
    """Cubic power curve between cut-in and rated speed, flat to cut-out."""
    if not wt.cut_in < wt.rated_speed < wt.cut_out:
        raise ValueError("turbine parameters must satisfy cut_in < rated_speed < cut_out")
    v = np.asarray(speed, dtype=float)
    ramp = wt.rating_mw * (v**3 - wt.cut_in**3) / (wt.rated_speed**3 - wt.cut_in**3)
    p = np.where(v < wt.cut_in, 0.0, np.where(v < wt.rated_speed, ramp, np.where(v < wt.cut_out, wt.rating_mw, 0.0)))
    return float(p) if p.ndim == 0 else p


def pv_power(ghi, temp, pv) -> np.ndarray | float:
    """Temperature-derated PV output with a NOCT cell-temperature estimate."""
    g = np.asarray(ghi, dtype=float)
    cell = np.asarray(temp, dtype=float) + g * (pv.noct - 20.0) / 800.0
    p = pv.rating_mw * (g / 1000.0) * (1.0 + pv.temp_coeff * (cell - 25.0))
    p = np.clip(p, 0.0, pv.rating_mw)
    return float(p) if p.ndim == 0 else p


def to_power_series(meteo: MeteoSeries, wts, pv) -> PowerSeries:
    per_wt = np.vstack([wind_power(meteo.wind_for(k), wt) for k, wt in enumerate(wts)]) if wts else np.zeros((0, len(meteo)))
    return PowerSeries(
        start_epoch=meteo.start_epoch,
        step=meteo.step,
        per_wt=per_wt,
        pv=pv_power(meteo.ghi, meteo.ambient_temp, pv),
        wt_ratings=tuple(wt.rating_mw for wt in wts),
        pv_rating=pv.rating_mw,
    )


# ---------------------------------------------------------------------------
# Forecasts
# ---------------------------------------------------------------------------


def make_forecast(
    actual: PowerSeries,
    at: float,
    horizon: float,
    step: float,
    mode: str = "perfect",
    seed: int = 0,
    sigma: float = 0.05,
) -> PowerSeries:
    """Synthesize a forecast for ``[at, at + horizon)`` at resolution ``step``.

    ``perfect`` returns period means of the actuals, ``persistence`` repeats
    the last sample observed before ``at``, ``noisy`` multiplies the perfect
    forecast by seeded ``1 + sigma * N(0, 1)`` noise.
    """
    if horizon <= 0 or abs(horizon / step - round(horizon / step)) > 1e-9:
        raise ValueError("horizon must be a positive multiple of the forecast step")
    n_periods = int(round(horizon / step))
    i0 = int(round((at - actual.start_epoch) / actual.step))
    per = step / actual.step
    k = int(round(per))
    if i0 < 0 or abs(per - k) > 1e-9 or k < 1:
        raise IncompatibleStep("forecast step must be a multiple of the data step", step=actual.step, target=step)
    i1 = i0 + n_periods * k
    if i1 > len(actual):
        raise HorizonExceedsData(
            f"forecast window ends at {actual.start_epoch + i1 * actual.step} s, data ends at {actual.start_epoch + actual.duration} s",
            at=at,
            horizon=horizon,
        )

    wt_ratings = np.asarray(actual.wt_ratings, dtype=float)[:, None]
    if mode == "persistence":
        j = max(i0 - 1, 0)
        per_wt = np.repeat(actual.per_wt[:, j : j + 1], n_periods, axis=1)
        pv = np.full(n_periods, actual.pv[j])
    elif mode in ("perfect", "noisy"):
        per_wt = actual.per_wt[:, i0:i1].reshape(actual.per_wt.shape[0], n_periods, k).mean(axis=2)
        pv = actual.pv[i0:i1].reshape(n_periods, k).mean(axis=1)
        if mode == "noisy":
            rng = np.random.default_rng([int(seed), int(round(at))])
            per_wt = np.clip(per_wt * (1.0 + sigma * rng.standard_normal(per_wt.shape)), 0.0, wt_ratings)
            pv = np.clip(pv * (1.0 + sigma * rng.standard_normal(pv.shape)), 0.0, actual.pv_rating)
    else:
        raise ValueError(f"unknown forecast mode {mode!r}")
    return PowerSeries(
        start_epoch=float(at),
        step=float(step),
        per_wt=per_wt,
        pv=pv,
        wt_ratings=actual.wt_ratings,
        pv_rating=actual.pv_rating,
    )
