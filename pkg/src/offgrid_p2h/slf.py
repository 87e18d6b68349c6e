"""Seconds-scale load following: moving-average renewable forecast, PI
correction with an affine SOC rectifier, and allocation across AEs."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NoAdjustableUnit, WarmUp
from .plant import STANDBY, STARTED


@dataclass(frozen=True)
class SlfParams:
    alpha: float = 0.5
    q: int = 4
    step_s: float = 5.0
    k_p: float = 20.0
    k_i: float = 3.0
    k_soc: float = 0.0142
    beta: float = 0.0286  # MW
    # pulls SOC back toward soc_ref by adding (soc - soc_ref) * gain MW to the tracking error
    soc_restore_gain: float = 0.0
    soc_ref: float = 0.5
    # back-calculation: the integral gives back the part of the previous
    # command the fleet could not reach (ramp or band limited)
    back_calculation: bool = True
    k_soc_fn: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("MA order must be at least 1")
        if self.step_s <= 0:
            raise ValueError("SLF step must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    def slope(self, soc: float) -> float:
        return self.k_soc if self.k_soc_fn is None else float(self.k_soc_fn(soc))


@dataclass
class SlfState:
    q: int = 4
    prev_forecast: Optional[float] = None
    integral: float = 0.0  # MW*s
    history: deque = None

    def __post_init__(self):
        if self.history is None:
            self.history = deque(maxlen=self.q)

    def observe(self, total_renewable: float) -> None:
        self.history.append(float(total_renewable))

    @property
    def warm(self) -> bool:
        return len(self.history) >= self.q


def fast_forecast(state: SlfState, params: SlfParams) -> float:
    if len(state.history) < params.q:
        raise WarmUp("not enough observations for the moving average", have=len(state.history), need=params.q)
    recent = list(state.history)[-params.q :]
    ma = sum(recent) / params.q
    prev = ma if state.prev_forecast is None else state.prev_forecast
    out = params.alpha * prev + (1.0 - params.alpha) * ma
    state.prev_forecast = out
    return out


def rectified_correction(
    forecast: float,
    prev_ae_total: float,
    soc: float,
    state: SlfState,
    params: SlfParams,
    integral_limit: float = np.inf,
) -> float:
    """Total AE load correction in MW.

    ``integral_limit`` bounds the integral term's contribution (MW); the
    simulator passes the fleet's adjustable range.
    """
    err = forecast - prev_ae_total + params.soc_restore_gain * (soc - params.soc_ref)
    state.integral += err * params.step_s
    ks = params.slope(soc)
    if params.k_i > 0 and ks > 0 and np.isfinite(integral_limit):
        cap = integral_limit / (ks * params.k_i)
        state.integral = min(max(state.integral, -cap), cap)
    return ks * (params.k_p * err + params.k_i * state.integral) + params.beta


def allocate(correction: float, fleet) -> np.ndarray:
    """Split a total correction over started units by adjustable capacity.

    Upward shares follow rated headroom S_i - P_i, downward shares follow
    current load P_i.
    """
    n = len(fleet)
    out = np.zeros(n)
    if correction == 0.0:
        return out
    started = np.array([u.state == STARTED for u in fleet])
    power = np.array([u.current_power for u in fleet], dtype=float)
    cap = np.array([u.params.capacity_mw for u in fleet], dtype=float)
    if correction > 0:
        weight = np.where(started, np.maximum(cap - power, 0.0), 0.0)
    else:
        weight = np.where(started, np.maximum(power, 0.0), 0.0)
    total = weight.sum()
    if total <= 0.0:
        raise NoAdjustableUnit("no started AE can take the correction", correction=correction)
    return weight / total * correction


def compose_reference(base, correction, fleet) -> tuple[np.ndarray, np.ndarray]:
    """Baseline plus correction, clamped to each unit's band.

    Returns (references, residual) where residual is what the clamp removed.
    """
    base = np.asarray(base, dtype=float)
    correction = np.asarray(correction, dtype=float)
    if base.shape != correction.shape or base.shape[0] != len(fleet):
        raise ValueError("baseline, correction and fleet differ in length")
    ref = np.zeros_like(base)
    resid = np.zeros_like(base)
    for i, u in enumerate(fleet):
        if u.state == STARTED:
            want = base[i] + correction[i]
            ref[i] = min(max(want, u.params.p_min), u.params.p_max)
            resid[i] = want - ref[i]
        elif u.state == STANDBY:
            ref[i] = u.params.standby_mw
    return ref, resid


class SlfController:
    """Per-run controller wrapper used by the simulator."""

    def __init__(self, params: SlfParams):
        self.params = params
        self.state = SlfState(q=params.q)
        self.last_forecast = np.nan
        self.last_correction = 0.0

    def step(self, observed_renewable: float, prev_ae_total: float, soc: float, base, fleet,
             shortfall: float = 0.0):
        """Returns (references, residual, total correction). During warm-up the
        baseline passes through unchanged. ``shortfall`` is previous command
        minus achieved power (MW), used when back-calculation is on."""
        self.state.observe(observed_renewable)
        gain = self.params.slope(soc) * self.params.k_i
        if self.params.back_calculation and gain > 0 and shortfall:
            self.state.integral -= shortfall / gain
        if not self.state.warm:
            ref, resid = compose_reference(base, np.zeros(len(fleet)), fleet)
            self.last_forecast = np.nan
            self.last_correction = 0.0
            return ref, resid, 0.0
        fc = fast_forecast(self.state, self.params)
        started = [u for u in fleet if u.state == STARTED]
        span = sum(u.params.p_max - u.params.p_min for u in started)
        corr_total = rectified_correction(fc, prev_ae_total, soc, self.state, self.params, integral_limit=span)
        try:
            shares = allocate(corr_total, fleet)
        except NoAdjustableUnit:
            shares = np.zeros(len(fleet))
        ref, resid = compose_reference(base, shares, fleet)
        self.last_forecast = fc
        self.last_correction = corr_total
        return ref, resid, corr_total
