"""Command-line front end: ``p2h <command> --config PATH [...]``.

Exit codes: 0 success, 2 configuration error, 3 run error. Errors are
printed to stderr as JSON ``{code, message, context}``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import SimConfig
from .errors import ConfigError, P2HError
from .runconfig import RunConfig, load_run_config
from .simulator import SimTrace, check_envelope, read_trace, run_emergency_test, run_production_sim, write_trace
from .sizing import SizingConfig, default_events, optimize_battery, table_csv

COMMANDS = ("validate", "simulate", "emergency", "size", "sensitivity", "export-plots")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


def _run_dir(cfg: RunConfig, args, name: str) -> Path:
    root = Path(args.out or cfg.paths.output_dir)
    if not args.no_timestamp:
        name = f"{name}-{time.strftime('%Y%m%dT%H%M%S')}"
    d = root / name
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_validate(cfg: RunConfig, args) -> int:
    sys.stdout.write(_dump(cfg.to_dict()))
    return 0


def cmd_simulate(cfg: RunConfig, args) -> int:
    out = _run_dir(cfg, args, "simulate")
    trace = run_production_sim(cfg.sim, cfg.load_meteo(), cfg.plant)
    write_trace(trace, out, cfg.sim.envelope)
    print(out)
    return 0


def cmd_emergency(cfg: RunConfig, args) -> int:
    out = _run_dir(cfg, args, "emergency")
    em = cfg.emergency
    sim = dataclasses.replace(cfg.sim, horizon_s=em.horizon_s, record_fast="full")
    events = em.events if em.events is not None else default_events(cfg.plant, em.scenario)
    comparison = []
    for k, ev in enumerate(events):
        row = {"event": dataclasses.asdict(ev)}
        for on in (True, False):
            tr = run_emergency_test(sim, cfg.plant, ev, socode_enabled=on, scenario=em.scenario)
            tag = "socode_on" if on else "socode_off"
            write_trace(tr, out / f"event{k}_{tag}", sim.envelope)
            env = check_envelope(tr, sim.envelope)
            row[tag] = {
                "envelope": "pass" if env.passed else "fail",
                "f_nadir": env.f_nadir,
                "f_peak": env.f_peak,
                "soc_min": tr.totals["soc_min"],
                "soc_max": tr.totals["soc_max"],
                "soc_excursion": max(em.scenario.soc0 - tr.totals["soc_min"], tr.totals["soc_max"] - em.scenario.soc0),
            }
        comparison.append(row)
    (out / "comparison.json").write_text(_dump(comparison))
    print(out)
    return 0


def _sizing_for_step(sizing: SizingConfig, slf_s: float) -> SizingConfig:
    """Apply one SLF step to every check; the balance tier runs its fast
    step at the SLF step."""
    def with_slf(sim: SimConfig, fast: float | None = None) -> SimConfig:
        return dataclasses.replace(sim, slf_s=slf_s, fast_s=sim.fast_s if fast is None else fast)

    return dataclasses.replace(
        sizing,
        gfm_sim=with_slf(sizing.gfm_sim),
        code_sim=with_slf(sizing.code_sim),
        balance_sim=with_slf(sizing.balance_sim, fast=slf_s),
    )


def cmd_size(cfg: RunConfig, args) -> int:
    out = _run_dir(cfg, args, "size")
    rep = optimize_battery(cfg.sizing, cfg.plant, cfg.econ, cfg.load_meteo())
    (out / "sizing_report.json").write_text(rep.to_json())
    (out / "sizing_table.csv").write_text(table_csv([rep.table_row()]))
    print(out)
    return 0


def _sensitivity_cell(job):
    cfg, slf_s, ramp = job
    plant = cfg.plant.with_ae(ramp_mw_s=ramp)
    sizing = _sizing_for_step(cfg.sizing, slf_s)
    rep = optimize_battery(sizing, plant, cfg.econ, cfg.load_meteo())
    return rep.table_row()


def cmd_sensitivity(cfg: RunConfig, args) -> int:
    out = _run_dir(cfg, args, "sensitivity")
    jobs = [(cfg, s, r) for s in cfg.sensitivity.slf_steps_s for r in cfg.sensitivity.ramps_mw_s]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sensitivity_cell, jobs))
    else:
        rows = [_sensitivity_cell(j) for j in jobs]
    (out / "sensitivity.csv").write_text(table_csv(rows))
    print(out)
    return 0


def long_format(trace: SimTrace) -> list[tuple]:
    """(tier, time, series, value) rows for every numeric trace column."""
    rows = []
    for tier, cols in (("fast", trace.fast), ("slf", trace.slf)):
        t = cols.get("t")
        if t is None:
            continue
        for name, values in cols.items():
            if name == "t":
                continue
            rows.extend((tier, float(tk), name, float(v)) for tk, v in zip(t, values))
    t = trace.slf.get("t", [])
    for i in range(trace.ae_power.shape[1] if trace.ae_power.ndim == 2 else 0):
        rows.extend(("slf", float(tk), f"ae_{i}", float(v)) for tk, v in zip(t, trace.ae_power[:, i]))
    return rows


def cmd_export_plots(cfg: RunConfig, args) -> int:
    src = Path(args.trace) if args.trace else Path(args.out or cfg.paths.output_dir) / "simulate"
    if not (src / "slf.csv").is_file():
        raise ConfigError("no trace to export; run simulate first or pass --trace", path=str(src))
    trace = read_trace(src)
    out = _run_dir(cfg, args, "plots")
    with (out / "plot_data.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("tier", "time", "series", "value"))
        for tier, t, name, v in long_format(trace):
            w.writerow((tier, repr(t), name, repr(v)))
    print(out)
    return 0


HANDLERS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "emergency": cmd_emergency,
    "size": cmd_size,
    "sensitivity": cmd_sensitivity,
    "export-plots": cmd_export_plots,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="p2h", description="Off-grid power-to-hydrogen simulation and battery sizing.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="run configuration JSON")
    ap.add_argument("--out", help="output directory (overrides paths.output_dir)")
    ap.add_argument("--seed", type=int, help="override the configured seed")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for sensitivity")
    ap.add_argument("--no-timestamp", action="store_true", help="stable output directory names")
    ap.add_argument("--trace", help="trace directory for export-plots")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    except P2HError as exc:
        sys.stderr.write(_dump(exc.to_dict()))
        return 2
    try:
        return HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        sys.stderr.write(_dump(exc.to_dict()))
        return 2
    except P2HError as exc:
        sys.stderr.write(_dump(exc.to_dict()))
        return 3


if __name__ == "__main__":
    sys.exit(main())
