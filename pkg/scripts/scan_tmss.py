"""Squeezed-vacuum scans: the (s, eta) violation map at fixed r, and
|<B>|max against r for the Q (s=-1), intermediate and Wigner (s=0) tests.

    python scripts/scan_tmss.py --jobs 8
    python scripts/scan_tmss.py --coarse
"""

import argparse
import sys

from qpbell import cli


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--r", default="0.4", help="squeezing for the (s, eta) map")
    p.add_argument("--coarse", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--prefix", default="tmss")
    args = p.parse_args()
    s_grid, eta_grid, r_grid = ("-1.6:0:17", "0.7:1:13", "0.05:2.5:11") if args.coarse else \
        ("-1.6:0:81", "0.7:1:61", "0.05:2.5:50")
    common = ["--jobs", str(args.jobs), "--restarts", str(args.restarts)]
    code = cli.main(["scan", "--state", "tmss", "--r", args.r, "--s", s_grid, "--eta", eta_grid,
                     *common, "--output", f"{args.prefix}_map_r{args.r}.csv"])
    code = max(code, cli.main(["scan", "--state", "tmss", "--r", r_grid, "--s-list", "0,-0.7,-1",
                               "--eta", "1", *common, "--output", f"{args.prefix}_vs_r.csv"]))
    sys.exit(code)


if __name__ == "__main__":
    main()
