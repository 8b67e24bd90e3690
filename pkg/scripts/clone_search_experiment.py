#!/usr/bin/env python3
"""Reuse sweep: how each program sketch degrades as programs share code.

Drives the installed CLI end to end (synth -> kmeans-train -> hash ->
index-search -> eval) for a range of cross-program reuse ratios and prints
one table row per ratio with mAP@k for the structural sketch, the weighted
semantic sketch, and plain mean pooling. The interesting regime is high
reuse, where most functions are common to every program and only the
weighting keeps the distinctive ones audible.

Example:
    python3 scripts/clone_search_experiment.py --classes 50 --reuse 0.0 0.8
"""

import argparse
import subprocess
import sys
import tempfile
from pathlib import Path


def run_cli(*argv):
    cmd = [sys.executable, "-m", "binsketch.cli", *map(str, argv)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(f"command failed ({proc.returncode}): {' '.join(cmd)}")
    report = {}
    for line in proc.stdout.strip().splitlines():
        key, _, value = line.partition("=")
        report[key] = value
    return report


def sweep_point(work: Path, args, reuse: float) -> dict[str, float]:
    run_cli(
        "synth",
        "--classes", args.classes,
        "--programs-per-class", args.programs_per_class,
        "--functions-per-program", args.functions_per_program,
        "--d", args.d,
        "--reuse", reuse,
        "--noise", args.noise,
        "--seed", args.seed,
        "--out-repo", work / "repo.tsv",
        "--out-query", work / "query.tsv",
        "--out-classes", work / "classes.tsv",
    )
    run_cli(
        "kmeans-train",
        "--corpus", work / "repo.tsv",
        "--n-clusters", args.n_clusters,
        "--sample", args.sample,
        "--seed", args.seed,
        "--out", work / "model.km",
    )
    scores = {}
    for mode in ("stru", "sem", "mean"):
        for side in ("repo", "query"):
            run_cli(
                "hash",
                "--corpus", work / f"{side}.tsv",
                "--mode", mode,
                "--model", work / "model.km",
                "--m", args.m,
                "--out", work / f"{side}.{mode}",
            )
        run_cli(
            "index-search",
            "--repo-emb", work / f"repo.{mode}",
            "--query-emb", work / f"query.{mode}",
            "--k", args.k,
            "--workers", args.workers,
            "--out", work / f"hits.{mode}.tsv",
        )
        report = run_cli(
            "eval",
            "--results", work / f"hits.{mode}.tsv",
            "--class-map", work / "classes.tsv",
            "--k", args.k,
            "--repo-emb", work / f"repo.{mode}",
        )
        scores[mode] = float(report["map_at_k"])
    return scores


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--classes", type=int, default=200)
    parser.add_argument("--programs-per-class", type=int, default=10)
    parser.add_argument("--functions-per-program", type=int, default=150)
    parser.add_argument("--d", type=int, default=32)
    parser.add_argument("--noise", type=float, default=0.45)
    parser.add_argument("--reuse", type=float, nargs="+", default=[0.0, 0.4, 0.8])
    parser.add_argument("--n-clusters", type=int, default=512)
    parser.add_argument("--sample", type=int, default=30000)
    parser.add_argument("--m", type=int, default=65536)
    parser.add_argument("--k", type=int, default=100)
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workdir", default=None, help="keep artifacts here instead of a tempdir")
    args = parser.parse_args()

    print(f"{'reuse':>6}  {'stru':>7}  {'sem':>7}  {'mean':>7}  {'sem-mean':>9}")
    for reuse in args.reuse:
        if args.workdir:
            work = Path(args.workdir) / f"reuse_{reuse:.2f}"
            work.mkdir(parents=True, exist_ok=True)
            scores = sweep_point(work, args, reuse)
        else:
            with tempfile.TemporaryDirectory() as tmp:
                scores = sweep_point(Path(tmp), args, reuse)
        gap = scores["sem"] - scores["mean"]
        print(
            f"{reuse:>6.2f}  {scores['stru']:>7.4f}  {scores['sem']:>7.4f}"
            f"  {scores['mean']:>7.4f}  {gap:>+9.4f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
