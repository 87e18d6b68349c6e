"""Constraint residuals of a schedule, computed from solution values alone."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..plant import SHUTDOWN, STANDBY, STARTED

TOL = 1e-6


@dataclass
class ResidualReport:
    residuals: dict = field(default_factory=dict)
    tol: float = TOL

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.residuals.values())

    @property
    def violations(self) -> list[str]:
        return [k for k, v in self.residuals.items() if v > self.tol]

    def __str__(self) -> str:
        lines = [f"{k:20s} {v:.3e} {'ok' if v <= self.tol else 'VIOLATED'}" for k, v in self.residuals.items()]
        return "\n".join(lines)


def _max(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(a)) if a.size else 0.0


def validate_solution(problem, sol, tol: float = TOL) -> ResidualReport:
    n, T = problem.n_ae, problem.n_periods
    bat = problem.battery
    pr = problem.params
    st, sb, sp = (np.asarray(a, float).reshape(n, T) for a in (sol.st, sol.sb, sol.sp))
    r = {}

    binaries = np.concatenate([a.ravel() for a in (st, sb, sp, sol.up_hot, sol.up_cold, sol.down)])
    r["status_exclusive"] = max(_max(np.abs(st + sb + sp - 1)), _max(np.minimum(np.abs(binaries), np.abs(binaries - 1))))

    init = problem.init_states
    prev = {
        s: np.column_stack([np.array([float(x == s) for x in init]).reshape(n, 1), blk[:, :-1]]) if n else blk
        for s, blk in ((STARTED, st), (STANDBY, sb), (SHUTDOWN, sp))
    }
    tr = [
        np.abs(np.asarray(sol.up_hot, float) - prev[STANDBY] * st),
        np.abs(np.asarray(sol.up_cold, float) - prev[SHUTDOWN] * st),
        np.abs(np.asarray(sol.down, float) - prev[STARTED] * sp),
        np.maximum(prev[SHUTDOWN] * sb, 0.0),  # shutdown units go through a start first
    ]
    r["transitions"] = max(_max(a) for a in tr) if n else 0.0

    md = 0.0
    for i in range(n):
        L = problem.min_down_periods(i)
        for t in range(T):
            Lt = min(L, T - t)
            md = max(md, sol.down[i, t] * Lt - sp[i, t : t + Lt].sum())
        forced = problem.forced_down_periods(i)
        if forced:
            md = max(md, _max(1.0 - sp[i, :forced]))
    r["min_downtime"] = md

    kk = np.array([a.curve.k_h2 / 1000.0 for a in problem.aes]).reshape(n, 1)
    P, q = np.asarray(sol.ae_power, float), np.asarray(sol.h2_rate, float)
    link = np.where(st > 0.5, np.abs(kk * q - P), np.abs(q) * kk)
    r["h2_linkage"] = _max(link) if n else 0.0

    psb = np.array([a.standby_mw for a in problem.aes]).reshape(n, 1)
    pmin = np.array([a.p_min for a in problem.aes]).reshape(n, 1)
    pmax = np.array([a.p_max for a in problem.aes]).reshape(n, 1)
    lo = sb * psb + st * pmin
    hi = sb * psb + st * pmax
    r["power_band"] = _max(np.maximum(lo - P, P - hi)) if n else 0.0
    r["power_band"] = max(r["power_band"], 0.0)

    C, D, soc = (np.asarray(a, float) for a in (sol.charge, sol.discharge, sol.soc))
    if bat.capacity_mwh > 0:
        k = problem.dt_h / bat.capacity_mwh
        prev_soc = np.concatenate([[problem.soc0], soc[:-1]])
        r["soc_recursion"] = _max(np.abs(soc - prev_soc - bat.efficiency * k * C + k * D / bat.efficiency))
        r["soc_cycle"] = max(0.0, abs(soc[-1] - problem.soc0) - pr.cycle_tol)
        r["soc_bounds"] = max(0.0, _max(bat.soc_min - soc), _max(soc - bat.soc_max))
        p_cap = bat.p_max
    else:
        r["soc_recursion"] = _max(np.abs(soc - problem.soc0))
        r["soc_cycle"] = 0.0
        r["soc_bounds"] = 0.0
        p_cap = 0.0
    r["charge_exclusive"] = max(
        _max(np.minimum(C, D)), _max(C - p_cap), _max(D - p_cap), _max(-C), _max(-D), 0.0
    )

    wcut, pcut = np.asarray(sol.wt_cut, float), np.asarray(sol.pv_cut, float)
    gen = problem.wt_forecast.sum(axis=0) + problem.pv_forecast
    net = gen - wcut.sum(axis=0) - pcut + D - C - P.sum(axis=0)
    r["power_balance"] = _max(np.abs(net))
    r["curtailment_bounds"] = max(
        0.0, _max(wcut - problem.wt_forecast), _max(-wcut), _max(pcut - problem.pv_forecast), _max(-pcut)
    )
    return ResidualReport(residuals=r, tol=tol)
