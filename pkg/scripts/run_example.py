"""Run the worked example (f2 = z, f4 = z^2) through the full pipeline.

    python3 scripts/run_example.py [--out DIR] [--grid N]
"""
import argparse
import sys
from pathlib import Path

from dpwdual.cli import run_pipeline, write_report
from dpwdual.config import parse_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", type=Path, default=ROOT / "out" / "example")
    ap.add_argument("--grid", type=int, help="nodes per axis (default 50)")
    args = ap.parse_args()
    cfg = parse_config(ROOT / "configs" / "default.toml")
    cfg = cfg.with_overrides(grid_nx=args.grid, grid_ny=args.grid, out=str(args.out))
    rep = run_pipeline(cfg)
    path = write_report(rep, args.out)
    for c in rep.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<40} {c.value:.3e} {c.relation} {c.threshold:.1e}")
    if rep.error:
        print("error:", rep.error)
    print(f"total {rep.timing['total']:.1f} s, report {path}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
