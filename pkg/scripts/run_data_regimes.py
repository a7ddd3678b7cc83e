#!/usr/bin/env python3
"""Accuracy vs training-set size over several seeds.

    python scripts/run_data_regimes.py --corpus runs/demo/corpus/corpus.jsonl \
        --manifest runs/demo/split/manifest.json --out runs/regimes --seeds 0 1 2

Runs the data-regimes harness once per seed (default fractions 0.25, 0.5,
0.75, 1.0; joint and lambda=0 baseline per fraction), pools the per-seed
tables, and prints mean accuracy per (fraction, model) plus the Spearman
rank correlation between fraction and joint-model accuracy.
"""

import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

from authorkit.cli import main as authorkit


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--epochs", type=int, default=2)
    parser.add_argument("--lr", type=float, default=1e-4)
    parser.add_argument("--tau", type=float, default=0.5)
    parser.add_argument("--overwrite", action="store_true")
    args = parser.parse_args()

    out = Path(args.out)
    ow = ["--overwrite"] if args.overwrite else []
    rows = []
    for seed in args.seeds:
        run_out = out / f"seed-{seed}"
        code = authorkit([
            "data-regimes", "--corpus", args.corpus, "--manifest", args.manifest,
            "--epochs", str(args.epochs), "--lr", str(args.lr), "--tau", str(args.tau),
            "--seed", str(seed), "--out", str(run_out),
        ] + ow)
        if code != 0:
            sys.exit(code)
        with open(run_out / "regimes.csv") as fh:
            for record in csv.DictReader(fh):
                rows.append((float(record["fraction"]), record["model"],
                             float(record["test_accuracy"])))

    by_cell = defaultdict(list)
    for fraction, model, acc in rows:
        by_cell[(fraction, model)].append(acc)
    print(f"{'fraction':>8} {'model':>9} {'mean_acc':>9} {'n':>3}")
    for (fraction, model), accs in sorted(by_cell.items()):
        print(f"{fraction:>8.2f} {model:>9} {sum(accs) / len(accs):>9.4f} {len(accs):>3}")

    try:
        from scipy.stats import spearmanr

        joint = [(f, a) for f, m, a in rows if m == "joint"]
        rho, _ = spearmanr([f for f, _ in joint], [a for _, a in joint])
        print(f"joint fraction-accuracy spearman rho: {rho:.4f}")
    except ImportError:
        print("scipy not installed; skipping the rank-correlation summary")


if __name__ == "__main__":
    main()
