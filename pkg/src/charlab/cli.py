"""``charlab`` command line.

Exit codes: 0 consistent with the theorem, 2 violation detected,
3 inconclusive, 1 error (bad config, failed precondition, I/O).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import CharlabError
from .qindep import EQUATIONS
from .report import build_report, write_report
from .theorems import CONSISTENT, INCONCLUSIVE, VIOLATION, residual_field, run
from .verify import verify_algebra

EXIT = {CONSISTENT: 0, VIOLATION: 2, INCONCLUSIVE: 3}
EXIT_ERROR = 1


def _fail(msg: str) -> int:
    print(f"charlab: error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        out_dir = Path(args.out_dir) if args.out_dir else cfg.out_dir
        verdict = run(cfg.experiment)
        artifacts = []
        for eq in cfg.csv:
            path = out_dir / f"field_{eq}.csv"
            out_dir.mkdir(parents=True, exist_ok=True)
            residual_field(cfg.experiment, eq).to_csv(path)
            artifacts.append(path.name)
        report = build_report(verdict, cfg, artifacts)
        path = write_report(report, out_dir / "report.json")
    except (CharlabError, OSError, ValueError) as exc:
        return _fail(str(exc))
    if cfg.verbosity:
        print(f"{verdict.theorem}: {verdict.conclusion}")
        for c in verdict.certificates:
            print(f"  {c.equation:<8} {c.verdict:<15} D={c.D} max residual {c.max_residual:.3e} "
                  f"(threshold {c.noise_threshold:.3e})")
        for d in verdict.diagnostics:
            print(f"  note: {d}")
        print(f"  report: {path}")
    return EXIT[verdict.conclusion]


def cmd_verify_algebra(args) -> int:
    rep = verify_algebra(args.n, args.d, args.seed, exact=args.exact, instances=args.instances,
                         fault="sign" if args.inject_fault else None)
    mode = "exact rationals" if args.exact else "floating point"
    print(f"verify-algebra n={args.n} d={args.d} seed={args.seed} ({mode}, {args.instances} instances)")
    for line in rep.lines():
        print("  " + line)
    print(f"{'all identities hold' if rep.ok else 'identity failure'} ({rep.seconds:.2f} s)")
    return 0 if rep.ok else 2


def cmd_dump_field(args) -> int:
    try:
        cfg = load_config(args.config)
        grid = residual_field(cfg.experiment, args.equation)
        if not grid.informative_points:
            print(f"charlab: {args.equation}: every grid point off the origin was culled by the CF floor "
                  f"(floor {cfg.experiment.grid.floor}); nothing written", file=sys.stderr)
            return EXIT[INCONCLUSIVE]
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        grid.to_csv(args.out)
    except (CharlabError, OSError, ValueError) as exc:
        return _fail(str(exc))
    print(f"wrote {grid.grid_points} points of the {args.equation} field to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="charlab", description="Characterization-theorem experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config and write report.json")
    r.add_argument("config")
    r.add_argument("--out-dir", default=None, help="directory for report.json (default: output.dir)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify-algebra", help="replay the exact elimination identities")
    v.add_argument("--n", type=int, default=3)
    v.add_argument("--d", type=int, default=2)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--instances", type=int, default=5)
    v.add_argument("--exact", action="store_true", help="use rational arithmetic")
    v.add_argument("--inject-fault", action="store_true", help="flip one sign in every pipeline")
    v.set_defaults(func=cmd_verify_algebra)

    dmp = sub.add_parser("dump-field", help="write a residual field as CSV")
    dmp.add_argument("config")
    dmp.add_argument("--equation", required=True, choices=EQUATIONS)
    dmp.add_argument("--out", required=True)
    dmp.set_defaults(func=cmd_dump_field)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "n", 2) < 2 or getattr(args, "d", 1) < 1:
        return _fail("need --n >= 2 and --d >= 1")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
