"""Maximum |<B>| of the single-photon entangled state over (s, eta).

Writes the scan CSV (columns s, eta, r, bell_magnitude, violated, ...);
cells with violated=false lie outside the plotted region.

    python scripts/scan_single_photon.py --jobs 8 -o single_photon.csv
    python scripts/scan_single_photon.py --coarse -o single_photon_coarse.csv
"""

import argparse
import sys

from qpbell import cli


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--coarse", action="store_true", help="17 x 11 grid instead of 81 x 41")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("-o", "--output", default="single_photon.csv")
    args = p.parse_args()
    s_grid, eta_grid = ("-1.6:0:17", "0.8:1:11") if args.coarse else ("-1.6:0:81", "0.8:1:41")
    sys.exit(cli.main(["scan", "--state", "single-photon", "--s", s_grid, "--eta", eta_grid,
                       "--jobs", str(args.jobs), "--restarts", str(args.restarts), "--audit", "0.05",
                       "--output", args.output]))


if __name__ == "__main__":
    main()
