"""MILP backend for the scheduling problem (HiGHS via highspy)."""

from __future__ import annotations

import highspy
import numpy as np
from scipy import sparse

from ..errors import Infeasible, SolverTimeout
from ..plant import SHUTDOWN, STANDBY, STARTED
from .problem import MilpModel, ScheduleProblem, build_model
from .solution import ScheduleSolution, solution_from_vector

_INT = highspy.HighsVarType.kInteger
_CONT = highspy.HighsVarType.kContinuous
_OPTIMAL = highspy.HighsModelStatus.kOptimal


def solver_integrality(model: MilpModel) -> np.ndarray:
    """Transition indicators are products of status binaries; once the
    statuses are integral the linearization pins them to 0/1, so the
    solver can treat them as continuous."""
    integ = model.integrality.copy()
    for name in ("uph", "upc", "down"):
        integ[model.vars.blocks[name].ravel()] = 0
    return integ


def _highs(c, A, row_lo, row_hi, col_lo, col_hi, integrality, rel_gap, time_limit):
    A = sparse.csc_matrix(A)
    lp = highspy.HighsLp()
    lp.num_col_ = len(c)
    lp.num_row_ = A.shape[0]
    lp.col_cost_ = np.asarray(c, float)
    lp.col_lower_ = np.asarray(col_lo, float)
    lp.col_upper_ = np.asarray(col_hi, float)
    lp.row_lower_ = np.asarray(row_lo, float)
    lp.row_upper_ = np.asarray(row_hi, float)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = A.indptr.astype(np.int32)
    lp.a_matrix_.index_ = A.indices.astype(np.int32)
    lp.a_matrix_.value_ = A.data
    if integrality is not None and integrality.any():
        lp.integrality_ = [_INT if v else _CONT for v in integrality]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("mip_rel_gap", float(rel_gap))
    h.setOptionValue("mip_abs_gap", 1e-9)
    h.setOptionValue("time_limit", float(time_limit))
    h.passModel(lp)
    return h


def _result(h):
    info = h.getInfo()
    x = np.array(h.getSolution().col_value) if info.primal_solution_status == 2 else None
    return h.getModelStatus(), x, info


def infeasibility_hint(problem: ScheduleProblem) -> str:
    bat = problem.battery
    if bat.capacity_mwh > 0 and not (bat.soc_min <= problem.soc0 <= bat.soc_max):
        return "initial SOC lies outside the allowed band"
    for i in range(problem.n_ae):
        if problem.forced_down_periods(i):
            return f"AE {i} is held down by its minimum downtime; supply may not cover the remaining fleet"
    return "standby loads or the SOC cycle band cannot be met by forecast supply plus battery"


def solve_schedule(problem: ScheduleProblem, backend="highs", warm_start: ScheduleSolution | None = None) -> ScheduleSolution:
    """Solve to the configured gap. With ``tie_break`` on, equal-cost optima
    are resolved toward fewer transitions and then lower-index units running.

    ``warm_start`` is the plan from the previous rolling window; it is shifted
    one period and offered to the solver as a starting incumbent.
    """
    if callable(backend):
        return backend(problem)
    if backend == "enumerate":
        from .enumerate import enumerate_solve

        return enumerate_solve(problem)
    if backend != "highs":
        raise ValueError(f"unknown backend {backend!r}")

    pr = problem.params
    model = build_model(problem)
    integ = solver_integrality(model)
    h = _highs(model.c, model.A, model.row_lo, model.row_hi, model.col_lo, model.col_hi, integ,
               pr.mip_rel_gap, pr.time_limit_s)
    if warm_start is not None:
        x0 = shifted_incumbent(problem, model, warm_start)
        if x0 is not None:
            _offer(h, x0)
    h.run()
    status, x, info = _result(h)
    if status == highspy.HighsModelStatus.kInfeasible:
        raise Infeasible("scheduling problem is infeasible", hint=infeasibility_hint(problem))
    if x is None:
        raise SolverTimeout("no feasible schedule found within the time limit", time_limit_s=pr.time_limit_s)
    gap = float(info.mip_gap) if model.n_binary and np.isfinite(info.mip_gap) else 0.0

    if pr.tie_break and model.n_binary:
        x = _tie_break(model, problem, float(model.c @ x), x, pr.time_limit_s)
    x = _polish(model, x)
    if pr.defer_battery:
        x = _defer_battery(model, x)
    return solution_from_vector(model, x, float(model.c @ x), gap, backend="highs")


def _offer(h, x):
    sol = highspy.HighsSolution()
    sol.col_value = list(x)
    h.setSolution(sol)


def _tie_break(model, problem, obj, x0, time_limit):
    b = model.vars.blocks
    n, T = problem.n_ae, problem.n_periods
    c2 = np.zeros_like(model.c)
    # index weights stay below one transition so transitions dominate
    weight = 1.0 + n * T * n
    for name in ("uph", "upc", "down"):
        c2[b[name].ravel()] = weight
    for i in range(n):
        c2[b["st"][i]] = i
    tol = 1e-7 * max(1.0, abs(obj))
    A = sparse.vstack([model.A, sparse.csr_matrix(model.c.reshape(1, -1))])
    lo = np.append(model.row_lo, -np.inf)
    hi = np.append(model.row_hi, obj + tol)
    h = _highs(c2, A, lo, hi, model.col_lo, model.col_hi, solver_integrality(model), 0.0, time_limit)
    _offer(h, x0)
    h.run()
    _, x, _ = _result(h)
    return x0 if x is None else x


def _fixed_lp(model, fix_idx, fix_val):
    lo, hi = model.col_lo.copy(), model.col_hi.copy()
    lo[fix_idx] = fix_val
    hi[fix_idx] = fix_val
    h = _highs(model.c, model.A, model.row_lo, model.row_hi, lo, hi, None, 0.0, 60.0)
    h.run()
    status, x, _ = _result(h)
    return x if status == _OPTIMAL else None


def _polish(model, x):
    """Re-solve the continuous part with the binaries fixed, removing objective
    slack admitted by the tie-break pass or by solver tolerances."""
    ints = np.flatnonzero(model.integrality)
    if ints.size == 0:
        return x
    y = _fixed_lp(model, ints, np.round(x[ints]))
    return x if y is None else y


def _defer_battery(model, x):
    """Among plans of equal cost with the same statuses, move battery use
    toward later periods. With identical periods the solver is otherwise free
    to spend the allowed SOC drift in the first period, which the rolling
    window then executes as a baseline jump."""
    b = model.vars.blocks
    T = b["C"].size
    if T < 2 or model.col_hi[b["C"]].max() <= 0:
        return x
    obj = float(model.c @ x)
    w = np.zeros_like(model.c)
    w[b["C"]] = w[b["D"]] = T - np.arange(T)
    ints = np.flatnonzero(model.integrality)
    lo, hi = model.col_lo.copy(), model.col_hi.copy()
    lo[ints] = hi[ints] = np.round(x[ints])
    A = sparse.vstack([model.A, sparse.csr_matrix(model.c.reshape(1, -1))])
    row_lo = np.append(model.row_lo, -np.inf)
    row_hi = np.append(model.row_hi, obj + 1e-9)
    h = _highs(w, A, row_lo, row_hi, lo, hi, None, 0.0, 60.0)
    h.run()
    status, y, _ = _result(h)
    return y if status == _OPTIMAL else x


def shifted_incumbent(problem: ScheduleProblem, model: MilpModel, prev: ScheduleSolution):
    """Feasible point built from the previous plan moved one period ahead, or
    None when it cannot be made consistent with the new window."""
    n, T = problem.n_ae, problem.n_periods
    if prev.st.shape != (n, T):
        return None
    b = model.vars.blocks

    def shift(a):
        return np.concatenate([a[..., 1:], a[..., -1:]], axis=-1).astype(float)

    st, sb, sp = shift(prev.st), shift(prev.sb), shift(prev.sp)
    init = np.array([[s == k for k in (STARTED, STANDBY, SHUTDOWN)] for s in problem.init_states], float)
    prev_st = np.column_stack([init[:, 0], st[:, :-1]])
    prev_sb = np.column_stack([init[:, 1], sb[:, :-1]])
    prev_sp = np.column_stack([init[:, 2], sp[:, :-1]])
    fixes = [
        (b["st"], st), (b["sb"], sb), (b["sp"], sp),
        (b["uph"], prev_sb * st), (b["upc"], prev_sp * st), (b["down"], prev_st * sp),
    ]
    dis = (shift(prev.discharge) > 1e-9).astype(float)
    fixes += [(b["bd"], dis), (b["bc"], 1.0 - dis)]
    idx = np.concatenate([i.ravel() for i, _ in fixes])
    val = np.concatenate([np.asarray(v, float).ravel() for _, v in fixes])
    if (val < model.col_lo[idx] - 1e-9).any() or (val > model.col_hi[idx] + 1e-9).any():
        return None
    return _fixed_lp(model, idx, val)


def solve_counts(problem: ScheduleProblem) -> dict:
    """Variable counts by kind, straight from the registry."""
    model = build_model(problem)
    b = model.vars.blocks
    status = sum(b[k].size for k in ("st", "sb", "sp", "uph", "upc", "down"))
    battery = b["bc"].size + b["bd"].size
    return {
        "status_binaries": int(status),
        "battery_binaries": int(battery),
        "binaries": model.n_binary,
        "continuous": model.n_continuous,
        "rows": model.A.shape[0],
    }
