"""Run every bundled config and print one line per run with its exit code."""
import argparse
import sys
import time
from pathlib import Path

from charlab import cli

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--configs", default=ROOT / "configs", type=Path)
    ap.add_argument("--out", default=ROOT / "runs", type=Path)
    args = ap.parse_args()
    worst = 0
    for cfg in sorted(args.configs.glob("*.toml")):
        t0 = time.perf_counter()
        code = cli.main(["run", str(cfg), "--out-dir", str(args.out / cfg.stem)])
        print(f"== {cfg.stem}: exit {code} ({time.perf_counter() - t0:.1f} s)\n")
        worst = max(worst, code == 1)
    return worst


if __name__ == "__main__":
    sys.exit(main())
