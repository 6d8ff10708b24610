"""Full reproduction, then a compact table of the headline numbers.

    python3 scripts/reproduce.py --scale paper --out-dir runs/paper
"""

import argparse
import json
import sys
from pathlib import Path

from aldsat.cli import main


def print_table(summary: dict) -> None:
    print(f"\n{summary['scale']} scale, {summary['protocol']}")
    for label, doc in summary["models"].items():
        print(f"  {label:>8}  mean_eps {doc['mean_eps']:+.4f}  std_eps {doc['std_eps']:.4f}")
    print("  points sweep (std_eps):")
    for key, doc in summary["sweep_points"].items():
        print(f"    {key:>10}  {doc['std_eps']:.4f}")
    print("  width sweep (std_eps):")
    for key, doc in summary["sweep_width"].items():
        print(f"    M={key:>3}  {doc['std_eps']:.4f}")
    print(f"  t_sat p99/p1: {summary['tsat_p99_over_p1']:.1f}")
    for name, ok in summary["checks"].items():
        print(f"  {'ok  ' if ok else 'FAIL'} {name}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--scale", choices=["ci", "paper"], default="paper")
    parser.add_argument("--out-dir", default=None)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()
    out = Path(args.out_dir or f"runs/{args.scale}")
    code = main(["reproduce-all", "--scale", args.scale, "--out-dir", str(out), "--workers", str(args.workers)])
    if code == 0:
        print_table(json.loads((out / "summary.json").read_text()))
    sys.exit(code)
