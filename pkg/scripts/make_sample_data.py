"""Regenerate the bundled synthetic week (60 s meteorology)."""

import argparse
from pathlib import Path

from offgrid_p2h.ingest import write_meteo_csv
from offgrid_p2h.synth import synthetic_meteo

DATA = Path(__file__).resolve().parents[1] / "src" / "offgrid_p2h" / "data"

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--days", type=float, default=7.0)
    ap.add_argument("--step", type=float, default=60.0)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=Path, default=DATA / "sample_week.csv")
    a = ap.parse_args()
    write_meteo_csv(synthetic_meteo(days=a.days, step=a.step, seed=a.seed), a.out)
    print(a.out)
