"""Schedule solution value object."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..plant import SHUTDOWN, STANDBY, STARTED


@dataclass(frozen=True, eq=False)
class ScheduleSolution:
    st: np.ndarray  # (n, T) 0/1
    sb: np.ndarray
    sp: np.ndarray
    up_hot: np.ndarray
    up_cold: np.ndarray
    down: np.ndarray
    ae_power: np.ndarray  # (n, T) MW
    h2_rate: np.ndarray  # (n, T) kg/h
    charge: np.ndarray  # (T,) MW
    discharge: np.ndarray  # (T,) MW
    soc: np.ndarray  # (T,) end-of-period fraction
    wt_cut: np.ndarray  # (m, T) MW
    pv_cut: np.ndarray  # (T,) MW
    objective: float
    gap: float = 0.0
    backend: str = ""
    candidates: int = 0  # status combinations examined (enumeration only)

    @property
    def n_periods(self) -> int:
        return self.charge.shape[0]

    def status(self, i: int, t: int) -> str:
        if self.st[i, t]:
            return STARTED
        if self.sb[i, t]:
            return STANDBY
        return SHUTDOWN

    def status_strings(self) -> list[str]:
        code = {STARTED: "S", STANDBY: "B", SHUTDOWN: "D"}
        return ["".join(code[self.status(i, t)] for t in range(self.n_periods)) for i in range(self.st.shape[0])]

    @property
    def total_curtailment(self) -> float:
        return float(self.wt_cut.sum() + self.pv_cut.sum())

    @property
    def n_transitions(self) -> int:
        return int(self.up_hot.sum() + self.up_cold.sum() + self.down.sum())

    def first_period_commands(self) -> tuple[list[str], np.ndarray]:
        """States and baseline powers binding for the next period."""
        n = self.st.shape[0]
        return [self.status(i, 0) for i in range(n)], self.ae_power[:, 0].copy()

    def to_dict(self) -> dict:
        return {
            "status": self.status_strings(),
            "ae_power": self.ae_power.tolist(),
            "h2_rate": self.h2_rate.tolist(),
            "charge": self.charge.tolist(),
            "discharge": self.discharge.tolist(),
            "soc": self.soc.tolist(),
            "wt_cut": self.wt_cut.tolist(),
            "pv_cut": self.pv_cut.tolist(),
            "objective": self.objective,
            "gap": self.gap,
            "backend": self.backend,
        }


def solution_from_vector(model, x: np.ndarray, objective: float, gap: float = 0.0, backend: str = "") -> ScheduleSolution:
    b = model.vars.blocks
    x = np.asarray(x, dtype=float)
    ints = model.integrality.astype(bool)
    x = x.copy()
    x[ints] = np.round(x[ints])

    def g(name):
        return x[b[name]]

    return ScheduleSolution(
        st=g("st").astype(int),
        sb=g("sb").astype(int),
        sp=g("sp").astype(int),
        up_hot=g("uph").astype(int),
        up_cold=g("upc").astype(int),
        down=g("down").astype(int),
        ae_power=g("P"),
        h2_rate=g("q"),
        charge=g("C"),
        discharge=g("D"),
        soc=g("soc"),
        wt_cut=g("wt_cut"),
        pv_cut=g("pv_cut"),
        objective=float(objective),
        gap=float(gap),
        backend=backend,
    )


def solution_objective(problem, sol: ScheduleSolution) -> float:
    """Recompute the scheduling objective from solution values."""
    p = problem.params
    return float(
        -p.h2_price * problem.dt_h * sol.h2_rate.sum()
        + p.c_up_hot * sol.up_hot.sum()
        + p.c_up_cold * sol.up_cold.sum()
        + p.c_down * sol.down.sum()
        + p.curtail_penalty * (sol.wt_cut.sum() + sol.pv_cut.sum())
    )
