"""Seeded detection rates of the default SD / Heyde / sample-mean configs per counterexample family."""
import argparse
import json

import numpy as np

from charlab.sweep import DRIVERS, FAMILIES, detection_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--families", nargs="+", default=list(FAMILIES), choices=list(FAMILIES))
    ap.add_argument("--drivers", nargs="+", default=list(DRIVERS), choices=list(DRIVERS))
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--N", type=int, default=100_000)
    ap.add_argument("--json", help="also write the table here")
    args = ap.parse_args()

    rows = []
    print(f"{'family':<12} {'driver':<12} {'detected':>9} {'median D3/thr':>14} {'seconds':>8}  conclusions")
    for fam in args.families:
        for th in args.drivers:
            r = detection_sweep(fam, th, seeds=args.seeds, N=args.N)
            med = float(np.median(r.ratios))
            print(f"{fam:<12} {th:<12} {r.detected:>5}/{r.seeds:<3} {med:>14.2f} {r.seconds:>8.1f}  {r.conclusions}")
            rows.append({"family": fam, "driver": th, "detected": r.detected, "seeds": r.seeds,
                         "median_ratio": med, "seconds": r.seconds, "conclusions": r.conclusions})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
