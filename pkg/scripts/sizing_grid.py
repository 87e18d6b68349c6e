"""Battery size over a (SLF step, AE ramp) grid on the trapezoidal-pulse scenario.

Prints one row per cell. Takes about a minute for the default 3x3 grid.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import scenarios  # noqa: E402
from offgrid_p2h.costing import EconParams  # noqa: E402
from offgrid_p2h.sizing import optimize_battery  # noqa: E402

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--slf", type=float, nargs="+", default=list(scenarios.SLF_STEPS))
    ap.add_argument("--ramp", type=float, nargs="+", default=list(scenarios.RAMPS))
    a = ap.parse_args()
    print("slf_s,ramp_mw_s,capacity_mwh,c_rate,iterations")
    for slf_s in a.slf:
        for ramp in a.ramp:
            rep = optimize_battery(*scenarios.case(slf_s, ramp)[:2], EconParams(), scenarios.SUPPLY)
            print(f"{slf_s:g},{ramp:g},{rep.battery.capacity_mwh:.3f},{rep.battery.c_rate:g},{len(rep.iterations)}")
