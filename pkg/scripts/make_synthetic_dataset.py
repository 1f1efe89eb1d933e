#!/usr/bin/env python3
"""Generate a seeded synthetic dataset and optionally analyze it in place.

The synthetic generator plants known device offsets, x/y gradients and local
process noise, and stores the drawn components in ground_truth.json, so the
analysis results can be compared against what was actually put in. Usage:

    python3 scripts/make_synthetic_dataset.py --seed 7 --preset spatial \
        --out synth-run/ --analyze
"""

import argparse
import sys
from pathlib import Path

from pufstat.cli import main as pufstat_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--preset", default="spatial", choices=("null", "spatial", "noisy"))
    parser.add_argument("--devices", type=int, default=None)
    parser.add_argument("--ros", type=int, default=None)
    parser.add_argument("--samples", type=int, default=None)
    parser.add_argument("--geometry", default=None)
    parser.add_argument("--out", required=True)
    parser.add_argument("--analyze", action="store_true",
                        help="run the analysis pipeline on the generated data")
    args = parser.parse_args()

    synth = ["synth", "--seed", str(args.seed), "--preset", args.preset,
             "--out", args.out]
    for flag, value in (("--devices", args.devices), ("--ros", args.ros),
                        ("--samples", args.samples), ("--geometry", args.geometry)):
        if value is not None:
            synth += [flag, str(value)]
    code = pufstat_main(synth)
    if code != 0:
        return code

    if not args.analyze:
        print(f"dataset in {Path(args.out) / 'dataset'}")
        return 0

    dataset = Path(args.out) / "dataset"
    base = ["--dataset", str(dataset), "--layout", "files",
            "--meta", str(dataset / "serials.csv"), "--out", args.out]
    for step in (
        ["ingest"] + base,
        ["normality"] + base,
        ["similarity"] + base,
        ["entropy"] + base,
        ["correlate"] + base,
        ["attack", "--seed", str(args.seed), "--devices", "4"] + base,
        ["pca", "--geometry", args.geometry or "8x16:col"] + base,
        ["report", "--out", args.out],
    ):
        print(f"==> pufstat {' '.join(step)}", flush=True)
        code = pufstat_main(step)
        if code != 0:
            print(f"step failed with exit code {code}", file=sys.stderr)
            return code
    print(f"analysis artifacts in {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
