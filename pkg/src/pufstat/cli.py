"""Command line interface for the analysis toolkit.

Subcommands: ingest, normality, similarity, entropy, correlate, attack,
pca, synth, report. Every run writes its artifacts plus a manifest into the
output directory (--out, or the PUFSTAT_OUT environment variable).

Exit codes: 0 success, 1 analysis error, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bias import bias_histogram, bias_report
from .correlation import fit_line, profile
from .covfit import evaluate_attack
from .dataset import LayoutSpec, load_metadata, load_readings, write_dataset
from .errors import PufStatError, UnavailableAnalysisError
from .geometry import DEFAULT_GEOMETRY, GridGeometry
from .matrices import build_matrices, pack_bits
from .normality import REJECT_1PCT, test_rows
from .output import ArtifactWriter, RunManifest, hash_input_files
from .pca import loading_map, pca, pc_key_correlation, standardize, truncated_bits
from .similarity import group_variance_map, serial_correlation
from .syngen import preset

MATRIX_CHOICES = ("freq", "dev", "diff", "all")
# "auto" spreads 8 counts over 0..7/8 of the pair count; at 256 pairs that
# is 0,32,64,96,128,160,192,224.
DEFAULT_FIXED_COUNTS = "auto"


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip() != ""]


def _resolve_out(args) -> Path:
    out = args.out or os.environ.get("PUFSTAT_OUT") or "pufstat-out"
    return Path(out)


def _load(args):
    layout = LayoutSpec.parse(args.layout)
    readings = load_readings(args.dataset, layout)
    meta = None
    if args.meta:
        meta = load_metadata(args.meta, readings.num_devices)
    return readings, meta, layout


def _input_hash(args, layout: LayoutSpec) -> str:
    root = Path(args.dataset)
    if layout.kind == "files":
        import fnmatch

        files = [
            p for p in root.iterdir()
            if p.is_file() and fnmatch.fnmatch(p.name, layout.pattern)
        ]
    else:
        files = [root]
    if args.meta:
        files.append(Path(args.meta))
    return hash_input_files(files)


def _manifest(args, subcommand: str, params: dict, layout: LayoutSpec | None) -> RunManifest:
    return RunManifest(
        version=__version__,
        subcommand=subcommand,
        params=params,
        dataset=str(args.dataset) if getattr(args, "dataset", None) else None,
        layout=layout.describe() if layout else None,
        meta=str(args.meta) if getattr(args, "meta", None) else None,
        geometry=getattr(args, "geometry", None),
        seed=getattr(args, "seed", None),
        input_sha256=_input_hash(args, layout) if layout else None,
    )


def cmd_ingest(args) -> int:
    readings, meta, layout = _load(args)
    matrices = build_matrices(readings)
    manifest = _manifest(args, "ingest", {}, layout)
    writer = ArtifactWriter(_resolve_out(args), manifest)

    def matrix_rows(m, label):
        header = [label] + [f"d{j}" for j in range(m.shape[1])]
        rows = [[i] + list(m[i]) for i in range(m.shape[0])]
        return header, rows

    for name, matrix, label, units in (
        ("freq.csv", matrices.freq, "ro", "MHz"),
        ("dev.csv", matrices.dev, "ro", "MHz"),
        ("diff.csv", matrices.diff, "pair", "MHz"),
        ("bits.csv", matrices.bits, "pair", "bit"),
    ):
        header, rows = matrix_rows(matrix, label)
        writer.write_csv(name, header, rows, units)
    if matrices.num_pairs % 8 == 0:
        writer.write_binary("bits.bin", pack_bits(matrices.bits))
    else:
        print(
            f"pufstat: note: {matrices.num_pairs} pairs is not a multiple of 8; "
            "skipping bits.bin",
            file=sys.stderr,
        )
    writer.finish()
    return 0


def cmd_normality(args) -> int:
    readings, _, layout = _load(args)
    matrices = build_matrices(readings)
    selected = MATRIX_CHOICES[:3] if args.matrix == "all" else (args.matrix,)
    manifest = _manifest(args, "normality", {"matrix": args.matrix}, layout)
    writer = ArtifactWriter(_resolve_out(args), manifest)
    for name in selected:
        matrix = getattr(matrices, name)
        results, summary = test_rows(matrix)
        rows = [
            [r.row_index, r.a2, r.a2_star, int(r.reject_at_1pct)] for r in results
        ]
        writer.write_csv(
            f"normality_{name}.csv",
            ["row", "a2", "a2_star", "reject"],
            rows,
            "dimensionless",
        )
        writer.write_json(
            f"normality_{name}_summary.json",
            {
                "matrix": name,
                "rows": len(results),
                "quantile_50": summary.quantile_50,
                "quantile_90": summary.quantile_90,
                "quantile_99": summary.quantile_99,
                "max": summary.max,
                "reject_fraction": sum(r.reject_at_1pct for r in results) / len(results),
                "threshold_1pct": REJECT_1PCT,
            },
        )
    writer.finish()
    return 0


def cmd_similarity(args) -> int:
    readings, meta, layout = _load(args)
    if meta is None:
        raise UnavailableAnalysisError(
            "similarity needs per-device serial numbers; pass --meta"
        )
    matrices = build_matrices(readings)
    gv = group_variance_map(matrices.dev, min_group=args.min_group)
    group_sizes = _int_list(args.group_sizes)
    manifest = _manifest(
        args,
        "similarity",
        {"min_group": args.min_group, "group_sizes": group_sizes},
        layout,
    )
    writer = ArtifactWriter(_resolve_out(args), manifest)
    rows = []
    num_devices = gv.num_devices
    for a in range(num_devices):
        for b in range(a + args.min_group - 1, num_devices):
            rows.append([a, b, gv.values[a, b]])
    writer.write_dat("group_variance.dat", "a b s2", [(None, rows)], "MHz^2")
    corr_rows = [[g, serial_correlation(gv, meta, g)] for g in group_sizes]
    writer.write_csv(
        "serial_corr.csv", ["group_size", "corr"], corr_rows, "dimensionless"
    )
    writer.finish()
    return 0


def cmd_entropy(args) -> int:
    readings, _, layout = _load(args)
    matrices = build_matrices(readings)
    report = bias_report(matrices.diff, matrices.bits)
    manifest = _manifest(args, "entropy", {}, layout)
    writer = ArtifactWriter(_resolve_out(args), manifest)
    rows = [
        [k, report.p_binary[k], report.p_normal[k]]
        for k in range(report.p_binary.size)
    ]
    writer.write_csv("bias.csv", ["k", "p_binary", "p_normal"], rows, "probability")
    edges, counts_bin, counts_norm = bias_histogram(report)
    hist_rows = [
        [edges[i], (edges[i] + edges[i + 1]) / 2.0, int(counts_bin[i]), int(counts_norm[i])]
        for i in range(counts_bin.size)
    ]
    writer.write_dat(
        "bias_hist.dat",
        "bin_left bin_center count_binary count_normal",
        [(None, hist_rows)],
        "bias (dimensionless)",
    )
    writer.write_json(
        "entropy.json",
        {
            "entropy_binary_bits": report.entropy_binary,
            "entropy_normal_bits": report.entropy_normal,
            "num_pairs": int(report.p_binary.size),
            "num_devices": report.num_devices,
            "convention": report.convention,
        },
    )
    writer.finish()
    return 0


def cmd_correlate(args) -> int:
    readings, _, layout = _load(args)
    matrices = build_matrices(readings)
    manifest = _manifest(args, "correlate", {}, layout)
    writer = ArtifactWriter(_resolve_out(args), manifest)
    summaries = {}
    for name, matrix, key in (
        ("coco_D.dat", matrices.dev, "dev"),
        ("coco_B.dat", matrices.diff, "diff"),
    ):
        prof = profile(matrix)
        rows = [[i, c] for i, c in enumerate(prof.coefficients)]
        writer.write_dat(name, "index r", [(None, rows)], "dimensionless")
        slope, intercept = fit_line(prof.coefficients)
        summaries[key] = {
            "reference_index": prof.reference_index,
            "slope": slope,
            "intercept": intercept,
        }
    writer.write_json("correlate.json", summaries)
    writer.finish()
    return 0


def cmd_attack(args) -> int:
    readings, _, layout = _load(args)
    matrices = build_matrices(readings)
    num_devices = matrices.num_devices
    if args.device_indices:
        devices = _int_list(args.device_indices)
    else:
        rng = np.random.default_rng(args.seed)
        devices = sorted(
            int(j) for j in rng.choice(num_devices, size=min(args.devices, num_devices), replace=False)
        )
    if args.fixed_counts == "auto":
        fixed_counts = [matrices.num_pairs * k // 8 for k in range(8)]
    else:
        fixed_counts = _int_list(args.fixed_counts)
    modes = ("trend", "exact") if args.mode == "both" else (args.mode,)
    manifest = _manifest(
        args,
        "attack",
        {
            "devices": devices,
            "fixed_counts": fixed_counts,
            "mode": args.mode,
            "select": args.select,
            "trend_magnitude": args.trend_magnitude,
        },
        layout,
    )
    writer = ArtifactWriter(_resolve_out(args), manifest)

    def run_device(device):
        out = []
        for mode in modes:
            out.extend(
                evaluate_attack(
                    matrices.diff,
                    device,
                    fixed_counts,
                    mode=mode,
                    seed=args.seed,
                    selection=args.select,
                    trend_magnitude=args.trend_magnitude,
                )
            )
        return out

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            per_device = list(pool.map(run_device, devices))
    else:
        per_device = [run_device(d) for d in devices]

    cells = [cell for group in per_device for cell in group]
    for cell in cells:
        if cell.error:
            print(
                f"pufstat: attack cell device={cell.device_index} mode={cell.mode} "
                f"fixed={cell.fixed_count} failed: {cell.error}",
                file=sys.stderr,
            )
    rows = [
        [
            c.device_index,
            c.mode,
            c.fixed_count,
            c.delta_correct,
            c.objective,
            c.iterations,
        ]
        for c in cells
    ]
    writer.write_csv(
        "attack.csv",
        ["device", "mode", "fixed_count", "delta_correct", "objective", "iterations"],
        rows,
        "bits (delta_correct), MHz^2 scaled (objective)",
    )
    blocks = []
    for mode in modes:
        mode_rows = []
        for count in fixed_counts:
            deltas = [
                c.delta_correct
                for c in cells
                if c.mode == mode and c.fixed_count == count and c.delta_correct is not None
            ]
            if deltas:
                mode_rows.append([count, min(deltas), max(deltas)])
        blocks.append((f"mode: {mode}", mode_rows))
    writer.write_dat(
        "attack_envelope.dat", "fixed_count min_delta max_delta", blocks, "bits"
    )
    writer.finish()
    return 0


def cmd_pca(args) -> int:
    readings, _, layout = _load(args)
    matrices = build_matrices(readings)
    geometry = GridGeometry.parse(args.geometry)
    scaled = standardize(matrices.freq)
    result = pca(scaled, geometry)
    manifest = _manifest(
        args,
        "pca",
        {"pcs": args.pcs, "trunc_ranks": args.trunc_ranks},
        layout,
    )
    writer = ArtifactWriter(_resolve_out(args), manifest)
    frac_rows = [
        [k + 1, result.singular_values[k], result.variance_fractions[k]]
        for k in range(result.rank)
    ]
    writer.write_csv(
        "pca_fractions.csv",
        ["pc", "singular_value", "variance_fraction"],
        frac_rows,
        "dimensionless",
    )
    num_pcs = min(args.pcs, result.rank)
    for pc_num in range(1, num_pcs + 1):
        grid = loading_map(result, pc_num, geometry)
        blocks = []
        for x in range(geometry.cols):
            col_rows = [[x, y, grid[y, x]] for y in range(geometry.rows)]
            blocks.append((None, col_rows))
        writer.write_dat(
            f"loading_pc{pc_num}.dat", "x y loading", blocks, "dimensionless"
        )
        scores = result.scores[:, pc_num - 1]
        counts, edges = np.histogram(scores, bins=40)
        hist_rows = [
            [(edges[i] + edges[i + 1]) / 2.0, int(counts[i])] for i in range(counts.size)
        ]
        writer.write_dat(
            f"scores_hist_pc{pc_num}.dat", "score count", [(None, hist_rows)],
            "score (dimensionless)",
        )
    if args.trunc_ranks:
        ranks = [r for r in _int_list(args.trunc_ranks) if 1 <= r <= result.rank]
    else:
        ranks = sorted(
            {1, 2, 4, 8, 16, 32, 64, 102, 128, result.rank} & set(range(1, result.rank + 1))
        )
    trunc_rows = []
    for r in ranks:
        _, agreement = truncated_bits(result, scaled, r)
        trunc_rows.append([r, agreement])
    writer.write_csv(
        "trunc_agreement.csv", ["r", "agreement"], trunc_rows, "fraction"
    )
    key_corr = {}
    for pc_num in range(1, min(3, result.rank) + 1):
        key_corr[f"pc{pc_num}"] = pc_key_correlation(result, matrices.bits, pc_num)
    writer.write_json(
        "pca_summary.json",
        {
            "rank": result.rank,
            "variance_fractions_head": [float(v) for v in result.variance_fractions[:8]],
            "ones_count_correlation": key_corr,
            "geometry": geometry.describe(),
        },
    )
    writer.finish()
    return 0


def cmd_synth(args) -> int:
    overrides = {}
    if args.devices is not None:
        overrides["num_devices"] = args.devices
    if args.ros is not None:
        overrides["num_ros"] = args.ros
    if args.samples is not None:
        overrides["num_samples"] = args.samples
    if args.geometry is not None:
        overrides["geometry"] = GridGeometry.parse(args.geometry)
    config = preset(args.preset, seed=args.seed, **overrides)
    from .syngen import generate

    tensor, meta, truth = generate(config)
    out_dir = _resolve_out(args)
    dataset_dir = out_dir / "dataset"
    layout = LayoutSpec.parse(args.layout)
    write_dataset(tensor, dataset_dir, layout, meta=meta)
    manifest = RunManifest(
        version=__version__,
        subcommand="synth",
        params={"preset": args.preset, "config": config.to_dict(), "layout": layout.describe()},
        seed=args.seed,
    )
    writer = ArtifactWriter(out_dir, manifest)
    writer.write_json("ground_truth.json", truth.to_dict())
    writer.finish()
    print(f"pufstat: synthetic dataset written to {dataset_dir}", file=sys.stderr)
    return 0


REPORT_REQUIRED = (
    "normality_freq_summary.json",
    "normality_dev_summary.json",
    "normality_diff_summary.json",
    "entropy.json",
    "attack_envelope.dat",
    "pca_fractions.csv",
)
REPORT_OPTIONAL = ("serial_corr.csv", "trunc_agreement.csv", "correlate.json")


def _read_csv_artifact(path: Path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return list(reader)


def _read_envelope(path: Path) -> list[dict]:
    entries = []
    mode = None
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("# mode:"):
            mode = line.split(":", 1)[1].strip()
        elif line and not line.startswith("#"):
            count, lo, hi = line.split()
            entries.append(
                {
                    "mode": mode,
                    "fixed_count": int(count),
                    "min_delta": float(lo),
                    "max_delta": float(hi),
                }
            )
    return entries


def cmd_report(args) -> int:
    out_dir = _resolve_out(args)
    missing = [name for name in REPORT_REQUIRED if not (out_dir / name).is_file()]
    if missing:
        raise UnavailableAnalysisError(
            "report inputs missing from "
            f"{out_dir}: {', '.join(sorted(missing))}"
        )
    payload = {"normality": {}, "entropy": {}, "attack": {}, "pca": {}}
    for name in ("freq", "dev", "diff"):
        data = json.loads((out_dir / f"normality_{name}_summary.json").read_text())
        data.pop("manifest_hash", None)
        payload["normality"][name] = data
    entropy_data = json.loads((out_dir / "entropy.json").read_text())
    entropy_data.pop("manifest_hash", None)
    payload["entropy"] = entropy_data
    payload["attack"]["envelope"] = _read_envelope(out_dir / "attack_envelope.dat")
    fractions = _read_csv_artifact(out_dir / "pca_fractions.csv")
    payload["pca"]["variance_fractions"] = [
        {"pc": int(row["pc"]), "variance_fraction": float(row["variance_fraction"])}
        for row in fractions
    ]
    for name in REPORT_OPTIONAL:
        path = out_dir / name
        if not path.is_file():
            continue
        if name == "serial_corr.csv":
            payload["similarity"] = {
                "serial_correlation": [
                    {"group_size": int(r["group_size"]), "corr": float(r["corr"])}
                    for r in _read_csv_artifact(path)
                ]
            }
        elif name == "trunc_agreement.csv":
            payload["pca"]["truncated_agreement"] = [
                {"r": int(r["r"]), "agreement": float(r["agreement"])}
                for r in _read_csv_artifact(path)
            ]
        elif name == "correlate.json":
            data = json.loads(path.read_text())
            data.pop("manifest_hash", None)
            payload["correlation_profiles"] = data
    manifest = RunManifest(
        version=__version__,
        subcommand="report",
        params={},
        input_sha256=hash_input_files(
            [out_dir / n for n in REPORT_REQUIRED]
            + [out_dir / n for n in REPORT_OPTIONAL if (out_dir / n).is_file()]
        ),
    )
    writer = ArtifactWriter(out_dir, manifest)
    writer.write_json("report.json", payload)
    writer.finish()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pufstat",
        description="Statistical security analysis of RO PUF frequency datasets.",
    )
    parser.add_argument("--version", action="version", version=f"pufstat {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    dataset_parent = argparse.ArgumentParser(add_help=False)
    dataset_parent.add_argument("--dataset", required=True, help="dataset directory or CSV file")
    dataset_parent.add_argument(
        "--layout", default="files",
        help="dataset layout descriptor (files[:rows=...|:sep=...|:pattern=...] or csv)",
    )
    dataset_parent.add_argument("--meta", default=None, help="device,serial CSV")
    out_parent = argparse.ArgumentParser(add_help=False)
    out_parent.add_argument(
        "--out", default=None, help="output directory (default: $PUFSTAT_OUT or ./pufstat-out)"
    )

    p = sub.add_parser("ingest", parents=[dataset_parent, out_parent],
                       help="export derived matrices and the packed bit stream")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("normality", parents=[dataset_parent, out_parent],
                       help="row-wise normality statistics")
    p.add_argument("--matrix", choices=MATRIX_CHOICES, default="all")
    p.set_defaults(func=cmd_normality)

    p = sub.add_parser("similarity", parents=[dataset_parent, out_parent],
                       help="group variance vs. serial numbers")
    p.add_argument("--min-group", type=int, default=5)
    p.add_argument("--group-sizes", default="5,10,20")
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("entropy", parents=[dataset_parent, out_parent],
                       help="bias estimates and response entropy")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("correlate", parents=[dataset_parent, out_parent],
                       help="correlation profiles of the deviation and difference matrices")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("attack", parents=[dataset_parent, out_parent],
                       help="leave-one-out covariance-fitting attack")
    p.add_argument("--seed", type=int, required=True, help="seed for device/position selection")
    p.add_argument("--devices", type=int, default=8, help="number of target devices to sample")
    p.add_argument("--device-indices", default=None, help="explicit comma-separated targets")
    p.add_argument(
        "--fixed-counts", default=DEFAULT_FIXED_COUNTS,
        help="comma-separated pinned-position counts, or 'auto' for 8 even steps",
    )
    p.add_argument("--mode", choices=("trend", "exact", "both"), default="both")
    p.add_argument("--select", choices=("even", "random"), default="even")
    p.add_argument("--trend-magnitude", type=float, default=1.0)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("pca", parents=[dataset_parent, out_parent],
                       help="principal component analysis of the frequency matrix")
    p.add_argument("--geometry", default=DEFAULT_GEOMETRY.describe(),
                   help="chip grid as ROWSxCOLS:order")
    p.add_argument("--pcs", type=int, default=8, help="components to export maps for")
    p.add_argument("--trunc-ranks", default=None,
                   help="comma-separated ranks for the truncation sweep")
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("synth", parents=[out_parent],
                       help="generate a synthetic dataset with ground truth")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--preset", default="spatial", help="null, spatial, or noisy")
    p.add_argument("--devices", type=int, default=None)
    p.add_argument("--ros", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--geometry", default=None)
    p.add_argument("--layout", default="files", help="layout for the written dataset")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", parents=[out_parent],
                       help="aggregate prior outputs into report.json")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PufStatError as exc:
        print(f"pufstat: {exc.category} error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"pufstat: i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
