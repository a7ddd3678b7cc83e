#!/usr/bin/env python3
"""End-to-end demo: synthesize a corpus, split it, train joint + baseline
models, evaluate both, and emit the full analysis bundle.

    python scripts/run_pipeline.py --out runs/demo [--seed 7] [--authors 10]

Artifacts land under the output directory: corpus/, split/, train/, eval/,
analyze/. The eval step writes the relative confusion matrix of the joint
model against the baseline; the analyze step adds distance reports, the
2-D projection, and cluster-quality numbers.
"""

import argparse
import sys
from pathlib import Path

from authorkit.cli import main as authorkit


def run(args: list[str]) -> None:
    print("+ authorkit " + " ".join(args))
    code = authorkit(args)
    if code != 0:
        sys.exit(code)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--authors", type=int, default=10)
    parser.add_argument("--docs-per-author", type=int, default=200)
    parser.add_argument("--doc-length", type=int, default=120)
    parser.add_argument("--vocab-size", type=int, default=2000)
    parser.add_argument("--skew", type=float, default=0.6)
    parser.add_argument("--epochs", type=int, default=8)
    parser.add_argument("--overwrite", action="store_true")
    args = parser.parse_args()

    out = Path(args.out)
    seed = str(args.seed)
    ow = ["--overwrite"] if args.overwrite else []

    run(["synth", "--authors", str(args.authors),
         "--docs-per-author", str(args.docs_per_author),
         "--doc-length", str(args.doc_length),
         "--vocab-size", str(args.vocab_size), "--skew", str(args.skew),
         "--seed", seed, "--out", str(out / "corpus")] + ow)
    corpus = str(out / "corpus" / "corpus.jsonl")

    run(["split", "--corpus", corpus, "--seed", seed, "--out", str(out / "split")] + ow)
    manifest = str(out / "split" / "manifest.json")

    run(["train", "--corpus", corpus, "--manifest", manifest,
         "--epochs", str(args.epochs), "--with-baseline",
         "--seed", seed, "--out", str(out / "train")] + ow)

    run(["eval", "--corpus", corpus, "--manifest", manifest, "--split", "test",
         "--checkpoint", str(out / "train" / "model"),
         "--baseline-checkpoint", str(out / "train" / "baseline"),
         "--seed", seed, "--out", str(out / "eval")] + ow)

    run(["analyze", "--corpus", corpus, "--manifest", manifest, "--split", "test",
         "--checkpoint", str(out / "train" / "model"),
         "--baseline-checkpoint", str(out / "train" / "baseline"),
         "--seed", seed, "--out", str(out / "analyze")] + ow)

    print(f"done; artifacts under {out}")


if __name__ == "__main__":
    main()
