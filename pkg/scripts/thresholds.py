"""Efficiency and s thresholds for both states, plus the TMSS Q-test
efficiency threshold as a function of squeezing.

    python scripts/thresholds.py                  # headline thresholds
    python scripts/thresholds.py --r-sweep 0.1:1.5:15 --output tmss_eta_vs_r.csv
"""

import argparse
import csv
import sys
import time

from qpbell import SearchOptions, SinglePhotonEntangled, Tmss, min_eta_threshold, min_s_threshold
from qpbell.cli import parse_grid


def headline(opts, tol):
    rows = []
    for name, state, axis, fixed in [
        ("single-photon", SinglePhotonEntangled(), "eta", -1.0),
        ("single-photon", SinglePhotonEntangled(), "eta", 0.0),
        ("single-photon", SinglePhotonEntangled(), "s", 1.0),
        ("tmss r=0.4", Tmss(0.4), "eta", -1.0),
        ("tmss r=0.4", Tmss(0.4), "s", 1.0),
    ]:
        t0 = time.perf_counter()
        if axis == "eta":
            res = min_eta_threshold(state, fixed, tol, opts)
        else:
            res = min_s_threshold(state, fixed, tol, opts)
        rows.append({"state": name, "axis": axis, "fixed": fixed, "threshold": res.threshold,
                     "bracket_lo": res.bracket_lo, "bracket_hi": res.bracket_hi,
                     "seconds": round(time.perf_counter() - t0, 1)})
    return rows


def r_sweep(r_grid, opts, tol):
    rows = []
    for r in r_grid:
        res = min_eta_threshold(Tmss(r), -1.0, tol, opts)
        rows.append({"r": r, "eta_threshold": res.threshold, "bracket_lo": res.bracket_lo,
                     "bracket_hi": res.bracket_hi})
        print(f"r={r:.3f} eta_min={res.threshold:.4f}", file=sys.stderr)
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--r-sweep", type=parse_grid, default=None, help="lo:hi:count")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--real-settings", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None)
    args = p.parse_args()
    opts = SearchOptions(restarts=args.restarts, complex_settings=not args.real_settings, seed=args.seed)
    rows = r_sweep(args.r_sweep, opts, args.tol) if args.r_sweep else headline(opts, args.tol)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    w = csv.DictWriter(out, fieldnames=list(rows[0]))
    w.writeheader()
    w.writerows(rows)


if __name__ == "__main__":
    main()
