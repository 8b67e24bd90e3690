#!/usr/bin/env python3
"""Sketch-length sweep: Jaccard estimation error versus bit-vector size.

Samples random label-set pairs with uniformly distributed overlap, hashes
them at several sketch lengths, and prints the mean and max absolute error
of the sketch Jaccard against the exact set Jaccard. Doubling m roughly
halves the error until the sketch dwarfs the sets.

Example:
    python3 scripts/hash_length_sweep.py --pairs 500 --max-labels 2000
"""

import argparse
import sys

import numpy as np

from binsketch.structural import FeatureHasher, jaccard, labels_to_bitvector


def sample_pair(rng, max_labels, universe):
    size_a = int(rng.integers(1, max_labels + 1))
    size_b = int(rng.integers(1, max_labels + 1))
    overlap = int(round(float(rng.random()) * min(size_a, size_b)))
    need = size_a + size_b - overlap
    pool = np.unique(rng.integers(0, universe, size=need + 2 * max_labels))[:need]
    if pool.size < need:
        raise SystemExit("universe too small for the requested set sizes")
    set_a = pool[:size_a]
    set_b = np.concatenate([pool[:overlap], pool[size_a:]])
    return set_a, set_b, overlap / need


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pairs", type=int, default=200)
    parser.add_argument("--max-labels", type=int, default=2000)
    parser.add_argument("--universe-bits", type=int, default=20)
    parser.add_argument(
        "--lengths", type=int, nargs="+",
        default=[1 << p for p in range(10, 19, 2)],
    )
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    pairs = [
        sample_pair(rng, args.max_labels, 1 << args.universe_bits)
        for _ in range(args.pairs)
    ]
    print(f"{'m':>8}  {'mean_abs_err':>12}  {'max_abs_err':>11}")
    for m in args.lengths:
        hasher = FeatureHasher(m=m)
        errors = []
        for set_a, set_b, exact in pairs:
            sketch_a = labels_to_bitvector(set_a, hasher)
            sketch_b = labels_to_bitvector(set_b, hasher)
            errors.append(abs(jaccard(sketch_a, sketch_b) - exact))
        print(f"{m:>8}  {np.mean(errors):>12.5f}  {np.max(errors):>11.5f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
