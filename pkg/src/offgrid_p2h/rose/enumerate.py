"""Exact reference solver: enumerate AE status strings, solve the continuous
dispatch LP for each, and branch on simultaneous charge/discharge.

Formulated directly from the status strings (no linearized products), so it
serves as an independent check of the MILP model.
"""

from __future__ import annotations

import itertools

import highspy
import numpy as np
from scipy import sparse

from ..errors import Infeasible, TooLarge
from ..plant import SHUTDOWN, STANDBY, STARTED
from .problem import ScheduleProblem
from .solution import ScheduleSolution

MAX_COMBINATIONS = 10**6
_EPS = 1e-9


def status_strings(problem: ScheduleProblem, i: int) -> list[tuple[str, ...]]:
    """All legal status sequences of unit i over the horizon."""
    T = problem.n_periods
    L = problem.min_down_periods(i)
    forced0 = problem.forced_down_periods(i)
    fixed = problem.fixed_status or {}
    out = []

    def rec(t, prev, hold, acc):
        if t == T:
            out.append(tuple(acc))
            return
        for s in (STARTED, STANDBY, SHUTDOWN):
            if fixed.get((i, t), s) != s:
                continue
            if hold > 0 and s != SHUTDOWN:
                continue
            if t < forced0 and s != SHUTDOWN:
                continue
            if prev == SHUTDOWN and s == STANDBY:
                continue
            nh = hold - 1 if hold > 0 else 0
            if prev == STARTED and s == SHUTDOWN:
                nh = min(L, T - t) - 1
            acc.append(s)
            rec(t + 1, s, nh, acc)
            acc.pop()

    rec(0, problem.init_states[i], 0, [])
    return out


def _transition_cost(problem, i, seq) -> tuple[float, int]:
    p = problem.params
    prev = problem.init_states[i]
    cost, count = 0.0, 0
    for s in seq:
        if prev == STANDBY and s == STARTED:
            cost += p.c_up_hot
            count += 1
        elif prev == SHUTDOWN and s == STARTED:
            cost += p.c_up_cold
            count += 1
        elif prev == STARTED and s == SHUTDOWN:
            cost += p.c_down
            count += 1
        prev = s
    return cost, count


class _DispatchLP:
    """Continuous dispatch for fixed AE statuses, solved incrementally."""

    def __init__(self, problem: ScheduleProblem):
        self.problem = problem
        n, T, m = problem.n_ae, problem.n_periods, problem.n_wt
        bat = problem.battery
        pr = problem.params
        self.has_bat = bat.capacity_mwh > 0
        self.iP = np.arange(n * T).reshape(n, T)
        o = n * T
        self.iC = np.arange(o, o + T)
        self.iD = np.arange(o + T, o + 2 * T)
        self.iS = np.arange(o + 2 * T, o + 3 * T)
        o += 3 * T
        self.iW = np.arange(o, o + m * T).reshape(m, T)
        o += m * T
        self.iV = np.arange(o, o + T)
        ncol = o + T

        self.rev = [pr.h2_price * problem.dt_h * 1000.0 / a.curve.k_h2 for a in problem.aes]
        cost = np.zeros(ncol)
        for i in range(n):
            cost[self.iP[i]] = -self.rev[i]
        cost[self.iW.ravel()] = pr.curtail_penalty
        cost[self.iV] = pr.curtail_penalty

        lo = np.zeros(ncol)
        hi = np.zeros(ncol)
        pmax = bat.p_max if self.has_bat else 0.0
        hi[self.iC] = pmax
        hi[self.iD] = pmax
        if self.has_bat:
            lo[self.iS], hi[self.iS] = bat.soc_min, bat.soc_max
        else:
            lo[self.iS] = hi[self.iS] = problem.soc0
        hi[self.iW] = problem.wt_forecast
        hi[self.iV] = problem.pv_forecast
        self.base_lo, self.base_hi = lo, hi

        r, c, v, rlo, rhi = [], [], [], [], []

        def row(terms, a, b):
            k = len(rlo)
            for col, val in terms:
                r.append(k)
                c.append(col)
                v.append(val)
            rlo.append(a)
            rhi.append(b)

        for t in range(T):
            gen = float(problem.wt_forecast[:, t].sum() + problem.pv_forecast[t])
            terms = [(self.iP[i, t], 1.0) for i in range(n)]
            terms += [(self.iW[l, t], 1.0) for l in range(m)]
            terms += [(self.iV[t], 1.0), (self.iC[t], 1.0), (self.iD[t], -1.0)]
            row(terms, gen, gen)
        if self.has_bat:
            k = problem.dt_h / bat.capacity_mwh
            eta = bat.efficiency
            for t in range(T):
                terms = [(self.iS[t], 1.0), (self.iC[t], -eta * k), (self.iD[t], k / eta)]
                if t == 0:
                    row(terms, problem.soc0, problem.soc0)
                else:
                    row(terms + [(self.iS[t - 1], -1.0)], 0.0, 0.0)
            row([(self.iS[T - 1], 1.0)], problem.soc0 - pr.cycle_tol, problem.soc0 + pr.cycle_tol)

        A = sparse.csc_matrix((v, (r, c)), shape=(len(rlo), ncol))
        lp = highspy.HighsLp()
        lp.num_col_ = ncol
        lp.num_row_ = len(rlo)
        lp.col_cost_ = cost
        lp.col_lower_ = lo
        lp.col_upper_ = hi
        lp.row_lower_ = np.array(rlo, dtype=float)
        lp.row_upper_ = np.array(rhi, dtype=float)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr.astype(np.int32)
        lp.a_matrix_.index_ = A.indices.astype(np.int32)
        lp.a_matrix_.value_ = A.data
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("primal_feasibility_tolerance", 1e-9)
        h.setOptionValue("dual_feasibility_tolerance", 1e-9)
        h.passModel(lp)
        self.h = h
        self.ncol = ncol

    def _set(self, idx, lo, hi):
        idx = np.asarray(idx, dtype=np.int32)
        self.h.changeColsBounds(len(idx), idx, np.asarray(lo, float), np.asarray(hi, float))

    def set_status(self, seqs):
        """Fix AE power bounds for the given per-unit status strings."""
        lo = np.zeros((self.problem.n_ae, self.problem.n_periods))
        hi = np.zeros_like(lo)
        const = 0.0
        for i, seq in enumerate(seqs):
            ae = self.problem.aes[i]
            for t, s in enumerate(seq):
                if s == STARTED:
                    lo[i, t], hi[i, t] = ae.p_min, ae.p_max
                elif s == STANDBY:
                    lo[i, t] = hi[i, t] = ae.standby_mw
                    const += self.rev[i] * ae.standby_mw  # standby produces no hydrogen
        self._set(self.iP.ravel(), lo.ravel(), hi.ravel())
        return const

    def solve(self):
        self.h.run()
        if self.h.getModelStatus() != highspy.HighsModelStatus.kOptimal:
            return None, None
        x = np.array(self.h.getSolution().col_value)
        return float(self.h.getInfo().objective_function_value), x

    def solve_exclusive(self, cutoff):
        """LP with charge/discharge exclusivity enforced by branching."""
        best = [np.inf, None]
        base_lo, base_hi = self.base_lo, self.base_hi

        def branch(fixed):
            obj, x = self.solve()
            if x is None or obj > min(best[0], cutoff) + 1e-7:
                return
            both = np.minimum(x[self.iC], x[self.iD])
            t = int(np.argmax(both))
            if both[t] <= _EPS:
                if obj < best[0] - 1e-9:
                    best[0], best[1] = obj, x
                return
            for col in (self.iC[t], self.iD[t]):
                self._set([col], [0.0], [0.0])
                branch(fixed + [col])
                self._set([col], [base_lo[col]], [base_hi[col]])

        branch([])
        return best[0], best[1]


def enumerate_solve(problem: ScheduleProblem, max_combinations: int = MAX_COMBINATIONS) -> ScheduleSolution:
    per_unit = [status_strings(problem, i) for i in range(problem.n_ae)]
    total = 1
    for cands in per_unit:
        total *= len(cands)
    if total > max_combinations:
        raise TooLarge(
            "status space too large for enumeration", combinations=total, limit=max_combinations
        )
    costs = [[_transition_cost(problem, i, seq) for seq in cands] for i, cands in enumerate(per_unit)]
    lp = _DispatchLP(problem)

    best = None  # (objective, key, seqs, x)
    n_evaluated = 0
    for choice in itertools.product(*[range(len(c)) for c in per_unit]):
        seqs = [per_unit[i][k] for i, k in enumerate(choice)]
        trans_cost = sum(costs[i][k][0] for i, k in enumerate(choice))
        n_trans = sum(costs[i][k][1] for i, k in enumerate(choice))
        idx_weight = sum(i * seq.count(STARTED) for i, seq in enumerate(seqs))
        const = lp.set_status(seqs) + trans_cost
        n_evaluated += 1
        cutoff = np.inf if best is None else best[0] - const + 1e-7 * max(1.0, abs(best[0]))
        obj, x = lp.solve_exclusive(cutoff)
        if x is None:
            continue
        total_obj = obj + const
        key = (n_trans, idx_weight)
        if best is None:
            best = (total_obj, key, seqs, x)
            continue
        tol = 1e-7 * max(1.0, abs(best[0]))
        if total_obj < best[0] - tol or (abs(total_obj - best[0]) <= tol and key < best[1]):
            best = (total_obj, key, seqs, x)
    if best is None:
        raise Infeasible("no status sequence admits a feasible dispatch", combinations=total)
    return _to_solution(problem, lp, best, total)


def _to_solution(problem, lp, best, total) -> ScheduleSolution:
    total_obj, _, seqs, x = best
    n, T = problem.n_ae, problem.n_periods
    st = np.array([[s == STARTED for s in seq] for seq in seqs], dtype=int).reshape(n, T)
    sb = np.array([[s == STANDBY for s in seq] for seq in seqs], dtype=int).reshape(n, T)
    sp = np.array([[s == SHUTDOWN for s in seq] for seq in seqs], dtype=int).reshape(n, T)
    prev_st = np.column_stack([[s == STARTED for s in problem.init_states], st[:, :-1]]) if n else st
    prev_sb = np.column_stack([[s == STANDBY for s in problem.init_states], sb[:, :-1]]) if n else sb
    prev_sp = np.column_stack([[s == SHUTDOWN for s in problem.init_states], sp[:, :-1]]) if n else sp
    P = x[lp.iP]
    P = np.where(st | sb, P, 0.0)
    kk = np.array([a.curve.k_h2 / 1000.0 for a in problem.aes]).reshape(n, 1)
    q = np.where(st == 1, P / kk, 0.0) if n else P
    sol = ScheduleSolution(
        st=st,
        sb=sb,
        sp=sp,
        up_hot=(prev_sb.astype(int) * st),
        up_cold=(prev_sp.astype(int) * st),
        down=(prev_st.astype(int) * sp),
        ae_power=P,
        h2_rate=q,
        charge=x[lp.iC],
        discharge=x[lp.iD],
        soc=x[lp.iS],
        wt_cut=x[lp.iW],
        pv_cut=x[lp.iV],
        objective=float(total_obj),
        backend="enumerate",
        candidates=total,
    )
    return sol
