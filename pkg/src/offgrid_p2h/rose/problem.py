"""Rolling electrolyzer scheduling problem: data, variable registry, matrix model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ..errors import DimensionMismatch
from ..plant import SHUTDOWN, STANDBY, STARTED, AE_STATES, AEParams, BatterySpec


@dataclass(frozen=True)
class RosesParams:
    step_s: float = 300.0
    horizon_periods: int = 48
    h2_price: float = 30.0  # CYN/kg
    c_up_hot: float = 2.0  # CYN per hot start
    c_up_cold: float = 10.0
    c_down: float = 5.0
    curtail_penalty: float = 1000.0  # CYN per MW per period
    cycle_tol: float = 0.05
    tie_break: bool = True
    defer_battery: bool = True  # among equal-cost plans, use the battery as late as possible
    mip_rel_gap: float = 0.0
    time_limit_s: float = 60.0


@dataclass(frozen=True, eq=False)
class ScheduleProblem:
    n_periods: int
    step_s: float
    wt_forecast: np.ndarray  # (m, T) MW
    pv_forecast: np.ndarray  # (T,) MW
    aes: tuple  # AEParams per unit
    init_states: tuple  # AE state at t = -1
    init_downtime: tuple  # seconds already spent shut down (inf: no obligation)
    battery: BatterySpec
    soc0: float
    params: RosesParams = field(default_factory=RosesParams)
    fixed_status: dict | None = None  # {(unit, period): state} pinned by the caller

    def __post_init__(self):
        wt = np.atleast_2d(np.asarray(self.wt_forecast, dtype=float))
        if wt.size == 0:
            wt = wt.reshape(0, self.n_periods)
        object.__setattr__(self, "wt_forecast", wt)
        object.__setattr__(self, "pv_forecast", np.asarray(self.pv_forecast, dtype=float))
        if self.n_periods < 1:
            raise DimensionMismatch("scheduling horizon must contain at least one period", n_periods=self.n_periods)
        if wt.shape[1] != self.n_periods or self.pv_forecast.shape != (self.n_periods,):
            raise DimensionMismatch(
                "forecast length differs from the number of periods",
                n_periods=self.n_periods,
                wt_shape=list(wt.shape),
                pv_len=len(self.pv_forecast),
            )
        if not (len(self.aes) == len(self.init_states) == len(self.init_downtime)):
            raise DimensionMismatch("AE parameter and initial-state lists differ in length")
        if any(s not in AE_STATES for s in self.init_states):
            raise ValueError("unknown initial AE state")
        p = self.params
        if min(p.h2_price, p.c_up_hot, p.c_up_cold, p.c_down, p.curtail_penalty) < 0:
            raise ValueError("prices must be non-negative")
        if (wt < 0).any() or (self.pv_forecast < 0).any():
            raise ValueError("forecasts must be non-negative")

    @property
    def n_ae(self) -> int:
        return len(self.aes)

    @property
    def n_wt(self) -> int:
        return self.wt_forecast.shape[0]

    @property
    def dt_h(self) -> float:
        return self.step_s / 3600.0

    def min_down_periods(self, i: int) -> int:
        return max(1, math.ceil(self.aes[i].min_down_s / self.step_s - 1e-9))

    def forced_down_periods(self, i: int) -> int:
        """Leading periods an initially shut-down unit must stay down."""
        if self.init_states[i] != SHUTDOWN:
            return 0
        remaining = self.aes[i].min_down_s - self.init_downtime[i]
        if remaining <= 0:
            return 0
        return min(self.n_periods, math.ceil(remaining / self.step_s - 1e-9))


def build_schedule_problem(forecast, plant, soc0: float, init_states, init_downtime=None) -> ScheduleProblem:
    """Assemble a scheduling problem from a forecast window and the plant."""
    rp = plant.roses
    T = rp.horizon_periods
    if len(forecast) < T or abs(forecast.step - rp.step_s) > 1e-9:
        raise DimensionMismatch(
            "forecast must cover the horizon at the scheduling step",
            forecast_len=len(forecast),
            forecast_step=forecast.step,
            horizon=T,
        )
    if init_downtime is None:
        init_downtime = tuple(math.inf for _ in init_states)
    return ScheduleProblem(
        n_periods=T,
        step_s=rp.step_s,
        wt_forecast=forecast.per_wt[:, :T],
        pv_forecast=forecast.pv[:T],
        aes=tuple(plant.aes),
        init_states=tuple(init_states),
        init_downtime=tuple(init_downtime),
        battery=plant.battery,
        soc0=soc0,
        params=rp,
    )


# ---------------------------------------------------------------------------
# Matrix model
# ---------------------------------------------------------------------------


class VarRegistry:
    def __init__(self):
        self.names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.integer: list[int] = []
        self.blocks: dict[str, np.ndarray] = {}

    def add(self, name: str, shape, lb=0.0, ub=np.inf, integer=False) -> np.ndarray:
        shape = tuple(shape) if isinstance(shape, (tuple, list)) else (shape,)
        n = int(np.prod(shape))
        start = len(self.names)
        idx = np.arange(start, start + n).reshape(shape)
        for flat in np.ndindex(*shape):
            self.names.append(name + "".join(f"_{k}" for k in flat))
        lbv = np.broadcast_to(np.asarray(lb, float), shape).ravel()
        ubv = np.broadcast_to(np.asarray(ub, float), shape).ravel()
        self.lb.extend(lbv.tolist())
        self.ub.extend(ubv.tolist())
        self.integer.extend([int(integer)] * n)
        self.blocks[name] = idx
        return idx

    def __len__(self) -> int:
        return len(self.names)

    def count(self, integer: bool) -> int:
        return sum(1 for v in self.integer if v == int(integer))


class RowBuilder:
    def __init__(self):
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []
        self.lo: list[float] = []
        self.hi: list[float] = []
        self.tags: list[str] = []

    def add(self, terms, lo=-np.inf, hi=np.inf, tag=""):
        r = len(self.lo)
        for col, val in terms:
            if val != 0.0:
                self.rows.append(r)
                self.cols.append(int(col))
                self.vals.append(float(val))
        self.lo.append(float(lo))
        self.hi.append(float(hi))
        self.tags.append(tag)

    def matrix(self, n_cols: int) -> sparse.csr_matrix:
        return sparse.csr_matrix((self.vals, (self.rows, self.cols)), shape=(len(self.lo), n_cols))


@dataclass(eq=False)
class MilpModel:
    c: np.ndarray
    A: sparse.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    col_lo: np.ndarray
    col_hi: np.ndarray
    integrality: np.ndarray
    names: list
    row_tags: list
    vars: VarRegistry

    @property
    def n_binary(self) -> int:
        return int(self.integrality.sum())

    @property
    def n_continuous(self) -> int:
        return int(len(self.integrality) - self.integrality.sum())


def build_model(problem: ScheduleProblem) -> MilpModel:
    """Linearized MILP: status exclusivity, transition products, min downtime,
    hydrogen linkage, load band, SOC recursion and cycle equilibrium,
    exclusive charge/discharge, power balance, curtailment bounds."""
    T, n, m = problem.n_periods, problem.n_ae, problem.n_wt
    pr = problem.params
    bat = problem.battery
    dt_h = problem.dt_h
    reg = VarRegistry()
    st = reg.add("st", (n, T), 0, 1, True)
    sb = reg.add("sb", (n, T), 0, 1, True)
    sp = reg.add("sp", (n, T), 0, 1, True)
    uph = reg.add("uph", (n, T), 0, 1, True)
    upc = reg.add("upc", (n, T), 0, 1, True)
    dwn = reg.add("down", (n, T), 0, 1, True)
    P = reg.add("P", (n, T), 0.0, np.array([[a.p_max] * T for a in problem.aes]).reshape(n, T) if n else 0.0)
    q = reg.add("q", (n, T), 0.0, np.inf)
    bc = reg.add("bc", T, 0, 1, True)
    bd = reg.add("bd", T, 0, 1, True)
    has_bat = bat.capacity_mwh > 0
    pmax = bat.p_max if has_bat else 0.0
    C = reg.add("C", T, 0.0, pmax)
    D = reg.add("D", T, 0.0, pmax)
    if has_bat:
        soc = reg.add("soc", T, bat.soc_min, bat.soc_max)
    else:
        soc = reg.add("soc", T, problem.soc0, problem.soc0)
    wcut = reg.add("wt_cut", (m, T), 0.0, problem.wt_forecast)
    pcut = reg.add("pv_cut", T, 0.0, problem.pv_forecast)

    lb = np.array(reg.lb)
    ub = np.array(reg.ub)
    rows = RowBuilder()

    for i, ae in enumerate(problem.aes):
        init = problem.init_states[i]
        prev = {s: float(init == s) for s in AE_STATES}
        L = problem.min_down_periods(i)
        forced = problem.forced_down_periods(i)
        M = ae.p_max
        kk = ae.curve.k_h2 / 1000.0  # MWh per kg
        for t in range(T):
            rows.add([(st[i, t], 1), (sb[i, t], 1), (sp[i, t], 1)], 1, 1, "status")
            # z = x_{t-1} * y_t linearized; previous period may be a constant
            for z, x_name, y in ((dwn, STARTED, sp), (uph, STANDBY, st), (upc, SHUTDOWN, st)):
                x = {STARTED: st, STANDBY: sb, SHUTDOWN: sp}[x_name]
                if t == 0:
                    x0 = prev[x_name]
                    rows.add([(z[i, t], 1)], -np.inf, x0, "transition")
                    rows.add([(z[i, t], 1), (y[i, t], -1)], -np.inf, 0, "transition")
                    rows.add([(z[i, t], 1), (y[i, t], -1)], x0 - 1, np.inf, "transition")
                else:
                    rows.add([(z[i, t], 1), (x[i, t - 1], -1)], -np.inf, 0, "transition")
                    rows.add([(z[i, t], 1), (y[i, t], -1)], -np.inf, 0, "transition")
                    rows.add([(z[i, t], 1), (x[i, t - 1], -1), (y[i, t], -1)], -1, np.inf, "transition")
            # a shut-down unit must be started before it can stand by
            if t == 0:
                if init == SHUTDOWN:
                    ub[sb[i, t]] = 0.0
            else:
                rows.add([(sb[i, t], 1), (sp[i, t - 1], 1)], -np.inf, 1, "no_sp_to_sb")
            # minimum downtime, truncated at the horizon end
            Lt = min(L, T - t)
            rows.add([(dwn[i, t], Lt)] + [(sp[i, h], -1) for h in range(t, t + Lt)], -np.inf, 0, "min_down")
            if t < forced:
                lb[sp[i, t]] = 1.0
            pinned = (problem.fixed_status or {}).get((i, t))
            if pinned is not None:
                for s_name, blk in ((STARTED, st), (STANDBY, sb), (SHUTDOWN, sp)):
                    v = float(s_name == pinned)
                    lb[blk[i, t]] = max(lb[blk[i, t]], v)
                    ub[blk[i, t]] = min(ub[blk[i, t]], v)
            # hydrogen linkage with big-M on the standby indicator
            rows.add([(q[i, t], kk), (P[i, t], -1), (sb[i, t], -M)], -np.inf, 0, "h2_link")
            rows.add([(P[i, t], 1), (q[i, t], -kk), (sb[i, t], -M)], -np.inf, 0, "h2_link")
            rows.add([(q[i, t], kk), (sb[i, t], M)], -np.inf, M, "h2_link")
            # implied by the rows above together with the load band; stated
            # explicitly because it tightens the relaxation considerably
            rows.add([(q[i, t], kk), (P[i, t], -1), (sb[i, t], ae.standby_mw)], 0, 0, "h2_link")
            # load band
            rows.add([(P[i, t], 1), (sb[i, t], -ae.standby_mw), (st[i, t], -ae.p_min)], 0, np.inf, "band")
            rows.add([(P[i, t], 1), (sb[i, t], -ae.standby_mw), (st[i, t], -ae.p_max)], -np.inf, 0, "band")

    eta = bat.efficiency
    for t in range(T):
        if has_bat:
            k = dt_h / bat.capacity_mwh
            terms = [(soc[t], 1), (C[t], -eta * k), (D[t], k / eta)]
            if t == 0:
                rows.add(terms, problem.soc0, problem.soc0, "soc")
            else:
                rows.add(terms + [(soc[t - 1], -1)], 0, 0, "soc")
        rows.add([(C[t], 1), (bc[t], -pmax)], -np.inf, 0, "charge_excl")
        rows.add([(D[t], 1), (bd[t], -pmax)], -np.inf, 0, "charge_excl")
        rows.add([(bc[t], 1), (bd[t], 1)], 0, 1, "charge_excl")
        gen = float(problem.wt_forecast[:, t].sum() + problem.pv_forecast[t])
        terms = [(wcut[l, t], -1) for l in range(m)] + [(pcut[t], -1), (D[t], 1), (C[t], -1)]
        terms += [(P[i, t], -1) for i in range(n)]
        rows.add(terms, -gen, -gen, "balance")
    if has_bat:
        rows.add([(soc[T - 1], 1)], problem.soc0 - pr.cycle_tol, problem.soc0 + pr.cycle_tol, "cycle")

    c = np.zeros(len(reg))
    c[q.ravel()] = -pr.h2_price * dt_h
    c[uph.ravel()] = pr.c_up_hot
    c[upc.ravel()] = pr.c_up_cold
    c[dwn.ravel()] = pr.c_down
    c[wcut.ravel()] = pr.curtail_penalty
    c[pcut] = pr.curtail_penalty

    return MilpModel(
        c=c,
        A=rows.matrix(len(reg)),
        row_lo=np.array(rows.lo),
        row_hi=np.array(rows.hi),
        col_lo=lb,
        col_hi=ub,
        integrality=np.array(reg.integer),
        names=reg.names,
        row_tags=rows.tags,
        vars=reg,
    )
