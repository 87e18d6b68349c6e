"""LP text-format export for external MILP solvers, and import of their
results as whitespace-separated ``name value`` pairs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch
from .problem import ScheduleProblem, build_model
from .solution import ScheduleSolution, solution_from_vector


def _num(v: float) -> str:
    return repr(float(v))


def _expr(cols, vals, names) -> str:
    parts = []
    for c, v in zip(cols, vals):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_num(abs(v))} {names[c]}")
    if not parts:
        return "0 " + names[0]
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


def write_lp(problem: ScheduleProblem, path=None) -> str:
    model = build_model(problem)
    names = model.names
    lines = ["\\ electrolyzer scheduling problem", "Minimize"]
    nz = np.flatnonzero(model.c)
    lines.append(" obj: " + _expr(nz, model.c[nz], names))
    lines.append("Subject To")
    A = model.A.tocsr()
    for r in range(A.shape[0]):
        cols = A.indices[A.indptr[r] : A.indptr[r + 1]]
        vals = A.data[A.indptr[r] : A.indptr[r + 1]]
        lo, hi = model.row_lo[r], model.row_hi[r]
        e = _expr(cols, vals, names)
        tag = f"{model.row_tags[r]}_{r}"
        if lo == hi:
            lines.append(f" {tag}: {e} = {_num(lo)}")
            continue
        if np.isfinite(lo):
            lines.append(f" {tag}_lo: {e} >= {_num(lo)}")
        if np.isfinite(hi):
            lines.append(f" {tag}_hi: {e} <= {_num(hi)}")
    lines.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = model.col_lo[j], model.col_hi[j]
        if lo == hi:
            lines.append(f" {name} = {_num(lo)}")
        elif np.isfinite(hi):
            lines.append(f" {_num(lo) if np.isfinite(lo) else '-inf'} <= {name} <= {_num(hi)}")
        elif np.isfinite(lo):
            lines.append(f" {name} >= {_num(lo)}")
        else:
            lines.append(f" {name} free")
    ints = [names[j] for j in np.flatnonzero(model.integrality)]
    if ints:
        lines.append("General")
        for k in range(0, len(ints), 8):
            lines.append(" " + " ".join(ints[k : k + 8]))
    lines.append("End")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def read_solution_values(source) -> dict:
    """Parse ``name value`` pairs; blank lines and ``#`` comments skipped,
    lines whose second token is not numeric ignored (solver headers)."""
    text = Path(source).read_text() if not isinstance(source, str) or "\n" not in source else source
    values = {}
    for line in text.splitlines():
        tok = line.split()
        if len(tok) < 2 or tok[0].startswith("#"):
            continue
        try:
            values[tok[0]] = float(tok[1])
        except ValueError:
            continue
    return values


def solution_from_values(problem: ScheduleProblem, values: dict, backend: str = "external") -> ScheduleSolution:
    model = build_model(problem)
    missing = [nm for nm in model.names if nm not in values]
    if missing:
        raise DimensionMismatch("solution file lacks variables", missing=missing[:10], n_missing=len(missing))
    x = np.array([values[nm] for nm in model.names])
    return solution_from_vector(model, x, float(model.c @ x), backend=backend)
