#!/usr/bin/env python3
"""Run the full analysis pipeline against a measured RO frequency dataset.

Feeds one dataset through every subcommand in dependency order and leaves
all artifacts plus report.json in the output directory. Usage:

    python3 scripts/run_reference_analysis.py --dataset /path/to/dataset \
        --meta /path/to/serials.csv --out results/
"""

import argparse
import sys

from pufstat.cli import main as pufstat_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--layout", default="files")
    parser.add_argument("--meta", default=None, help="device,serial CSV (enables similarity)")
    parser.add_argument("--out", required=True)
    parser.add_argument("--geometry", default="16x32:col")
    parser.add_argument("--seed", type=int, default=1, help="attack device/position seed")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    base = ["--dataset", args.dataset, "--layout", args.layout, "--out", args.out]
    if args.meta:
        base += ["--meta", args.meta]

    steps = [
        ["ingest"] + base,
        ["normality", "--matrix", "all"] + base,
        ["entropy"] + base,
        ["correlate"] + base,
        [
            "attack", "--seed", str(args.seed), "--devices", "8",
            "--mode", "both", "--threads", str(args.threads),
        ] + base,
        ["pca", "--geometry", args.geometry] + base,
    ]
    if args.meta:
        steps.insert(2, ["similarity"] + base)
    steps.append(["report", "--out", args.out])

    for step in steps:
        print(f"==> pufstat {' '.join(step)}", flush=True)
        code = pufstat_main(step)
        if code != 0:
            print(f"step failed with exit code {code}", file=sys.stderr)
            return code
    print(f"all artifacts in {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
