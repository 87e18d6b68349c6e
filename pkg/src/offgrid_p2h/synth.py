"""Seeded synthetic meteorology and power profiles for demos and tests."""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .ingest import MeteoSeries, PowerSeries


def _ou(rng, n, dt, tau, sigma):
    # Ornstein-Uhlenbeck path with exact discretization
    a = np.exp(-dt / tau)
    noise = rng.standard_normal(n) * sigma * np.sqrt(1 - a * a)
    x0 = rng.standard_normal() * sigma
    x, _ = lfilter([1.0], [1.0, -a], noise, zi=[a * x0])
    return x


def synthetic_meteo(days: float = 7.0, step: float = 60.0, seed: int = 0, n_turbines: int = 3,
                    mean_wind: float = 9.0, start_epoch: float = 0.0, day_of_year: int = 80) -> MeteoSeries:
    """Wind from a slow diurnal mean plus correlated gusts; irradiance from a
    clear-sky bell shaped by a cloud process; sinusoidal air temperature."""
    rng = np.random.default_rng(seed)
    n = int(round(days * 86400 / step))
    t = np.arange(n) * step
    hour = (t / 3600.0) % 24.0
    synoptic = 2.0 * np.sin(2 * np.pi * t / (3.3 * 86400) + rng.uniform(0, 2 * np.pi))
    diurnal = 0.8 * np.sin(2 * np.pi * (hour - 15.0) / 24.0)
    common = _ou(rng, n, step, 3 * 3600.0, 1.5)
    wind = []
    for _ in range(n_turbines):
        gust = _ou(rng, n, step, 600.0, 0.8)
        wind.append(np.clip(mean_wind + synoptic + diurnal + common + gust, 0.0, None))

    decl = 23.44 * np.sin(np.radians(360.0 * (284 + day_of_year) / 365.0))
    lat = 41.0
    ha = 15.0 * (hour - 12.0)
    cos_z = (np.sin(np.radians(lat)) * np.sin(np.radians(decl))
             + np.cos(np.radians(lat)) * np.cos(np.radians(decl)) * np.cos(np.radians(ha)))
    clear = 1000.0 * np.clip(cos_z, 0.0, None) ** 1.15
    cloud = np.clip(0.85 + _ou(rng, n, step, 1800.0, 0.2), 0.2, 1.0)
    ghi = clear * cloud
    temp = 8.0 + 7.0 * np.sin(2 * np.pi * (hour - 9.0) / 24.0) + _ou(rng, n, step, 6 * 3600.0, 1.0)
    return MeteoSeries(start_epoch=start_epoch, step=step, wind_speed=np.vstack(wind), ghi=ghi, ambient_temp=temp)


def trapezoid_pulses(duration_s: float, step: float = 5.0, base_mw: float = 9.0, lift_mw: float = 4.0,
                     period_s: float = 300.0, edge_s: float = 60.0, hold_s: float = 90.0,
                     wt_ratings=(6.25, 6.25, 6.25), pv_rating: float = 5.0) -> PowerSeries:
    """Repeating trapezoidal surges on the first turbine's output.

    Each period rises by ``lift_mw`` over ``edge_s``, holds for ``hold_s``,
    falls back over ``edge_s`` and rests at ``base_mw``. Every whole period
    has the same mean, so a scheduler working on period averages sees flat
    supply while the seconds-scale tiers see the ramps.
    """
    if 2 * edge_s + hold_s > period_s:
        raise ValueError("pulse does not fit in its period")
    t = np.arange(int(round(duration_s / step)) + 1) * step
    ph = t % period_s
    shape = np.clip(ph / edge_s, 0, 1) - np.clip((ph - edge_s - hold_s) / edge_s, 0, 1)
    per_wt = np.zeros((len(wt_ratings), t.size))
    per_wt[0] = base_mw + lift_mw * shape
    return PowerSeries(0.0, step, per_wt, np.zeros(t.size), tuple(wt_ratings), pv_rating)
