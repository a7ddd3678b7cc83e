"""Command-line pipeline: synth, split, train, eval, data-regimes, analyze, project.

Every command takes --out, --overwrite, --seed, and --config <json>; values
resolve as explicit flag > config-file key > built-in default. Each run
writes its artifacts plus a run_record.json carrying the resolved config,
corpus checksums, and an artifact inventory. All randomness derives from the
recorded seed, so reruns with --overwrite reproduce identical artifact bytes
(the run record itself carries wall-clock timestamps).
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    ConfusionMatrix,
    DistanceReport,
    ProfileConfig,
    accuracy,
    analyze_corpus,
    cluster_quality,
    macro_metrics,
    project_embeddings,
    relative_confusion,
    scale_dissimilarity_columns,
)
from .corpus import (
    Corpus,
    SplitManifest,
    corpus_sha256,
    generate_synthetic_corpus,
    load_corpus,
    save_corpus,
    stratified_split,
    stratified_subsample,
)
from .encoder import AttributionModel, ModelConfig, build_token_vocab, load_checkpoint, save_checkpoint
from .lda import fit_lda, topic_features
from .losses import LossConfig
from .stylometry import build_ngram_vocab, content_features, feature_matrix_csv, hybrid_features, style_features
from .training import TrainConfig, evaluate, train

TRAIN_DEFAULTS = {
    "epochs": 8, "batch_size": 24, "lr": 1e-3, "lr_min": 0.0, "weight_decay": 0.01,
    "tau": 0.1, "lam": 1.0, "exclude_self": False, "sampler": "shuffle",
    "balanced_authors": 8, "balanced_docs": 3,
}

MODEL_DEFAULTS = {
    "vocab_cap": 8000, "d_tok": 64, "d_h": 128, "d_e": 64, "d_h2": 128,
    "dropout": 0.35, "max_len": 256,
}

SYNTH_DEFAULTS = {
    "authors": 10, "docs_per_author": 200, "doc_length": 120,
    "vocab_size": 2000, "skew": 0.6,
}

ANALYZE_DEFAULTS = {
    "top_pairs": 4, "k_per_order": 1000, "lda_topics": 20,
    "lda_iterations": 500, "lda_infer_iterations": 100,
    "split": "test", "export_features": False,
}


def _derive_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % (2**63)


class ArtifactWriter:
    """Tracks output files under one directory and enforces --overwrite."""

    def __init__(self, out_dir: str | Path, overwrite: bool):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.overwrite = overwrite
        self.artifacts: list[str] = []
        self.started_at = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())

    def precheck(self, *names: str) -> None:
        for name in names:
            target = self.out_dir / name
            if target.exists() and not self.overwrite:
                raise FileExistsError(f"refusing to overwrite {target}; pass --overwrite")

    def path(self, name: str) -> Path:
        self.precheck(name)
        self.artifacts.append(name)
        return self.out_dir / name

    def write_json(self, name: str, obj) -> Path:
        target = self.path(name)
        target.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return target

    def write_text(self, name: str, text: str) -> Path:
        target = self.path(name)
        target.write_text(text, encoding="utf-8")
        return target

    def write_run_record(self, command: str, config: dict, checksums: dict[str, str]) -> None:
        record = {
            "command": command,
            "config": config,
            "corpus_sha256": checksums,
            "code_version": __version__,
            "started_at": self.started_at,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "artifacts": sorted(set(self.artifacts)),
        }
        target = self.out_dir / "run_record.json"
        target.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    text = str(value)
    if any(c in text for c in ",\"\n"):
        text = '"' + text.replace('"', '""') + '"'
    return text


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_csv_cell(v) for v in row) + "\n")
    return buf.getvalue()


def matrix_csv(labels: list[str], matrix: np.ndarray) -> str:
    matrix = np.asarray(matrix)
    integral = np.issubdtype(matrix.dtype, np.integer)
    rows = []
    for i, label in enumerate(labels):
        cast = int if integral else float
        rows.append([label] + [cast(matrix[i, j]) for j in range(len(labels))])
    return csv_text([""] + labels, rows)


# ----------------------------------------------------------------------
# config resolution
# ----------------------------------------------------------------------

class Settings:
    """Flag > config-file key > default, with required-key checking."""

    def __init__(self, args: argparse.Namespace, defaults: dict):
        self.config = {}
        if getattr(args, "config", None):
            obj = json.loads(Path(args.config).read_text(encoding="utf-8"))
            if not isinstance(obj, dict):
                raise ValueError("config file must hold a json object")
            self.config = obj
        self.args = args
        self.defaults = defaults

    def get(self, key: str, default=None):
        value = getattr(self.args, key, None)
        if value is None:
            value = self.config.get(key)
        if value is None:
            value = self.defaults.get(key, default)
        return value

    def require(self, key: str):
        value = self.get(key)
        if value is None:
            raise ValueError(f"missing required option --{key.replace('_', '-')} (flag or config)")
        return value

    def resolved(self, keys) -> dict:
        return {key: self.get(key) for key in keys}


def _train_config(resolved: dict, seed: int) -> TrainConfig:
    loss = LossConfig(
        tau=float(resolved["tau"]),
        lam=float(resolved["lam"]),
        include_self=not bool(resolved["exclude_self"]),
    )
    return TrainConfig(
        epochs=int(resolved["epochs"]),
        batch_size=int(resolved["batch_size"]),
        lr0=float(resolved["lr"]),
        lr_min=float(resolved["lr_min"]),
        weight_decay=float(resolved["weight_decay"]),
        loss=loss,
        seed=seed,
        sampler=str(resolved["sampler"]),
        balanced_authors=int(resolved["balanced_authors"]),
        balanced_docs=int(resolved["balanced_docs"]),
    )


def _model_config(resolved: dict) -> ModelConfig:
    return ModelConfig(
        d_tok=int(resolved["d_tok"]),
        d_h=int(resolved["d_h"]),
        d_e=int(resolved["d_e"]),
        d_h2=int(resolved["d_h2"]),
        dropout_rate=float(resolved["dropout"]),
        vocab_cap=int(resolved["vocab_cap"]),
        max_len=int(resolved["max_len"]),
    )


def _split_corpora(corpus: Corpus, manifest: SplitManifest) -> dict[str, Corpus]:
    return {name: corpus.subset(ids) for name, ids in manifest.splits().items()}


def _fit_model(train_corpus: Corpus, val_corpus: Corpus | None, model_cfg: ModelConfig,
               train_cfg: TrainConfig, init_seed: int, ce_only: bool = False):
    vocab = build_token_vocab(train_corpus, cap=model_cfg.vocab_cap, max_len=model_cfg.max_len)
    model = AttributionModel.build(vocab, train_corpus.authors, model_cfg, init_seed=init_seed)
    return train(model, train_corpus, val_corpus, train_cfg, ce_only=ce_only)


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_synth(args) -> int:
    settings = Settings(args, SYNTH_DEFAULTS)
    resolved = settings.resolved(SYNTH_DEFAULTS)
    seed = int(settings.get("seed", 0) or 0)
    writer = ArtifactWriter(args.out, args.overwrite)
    corpus = generate_synthetic_corpus(
        num_authors=int(resolved["authors"]),
        docs_per_author=int(resolved["docs_per_author"]),
        doc_length=int(resolved["doc_length"]),
        vocab_size=int(resolved["vocab_size"]),
        skew=float(resolved["skew"]),
        seed=seed,
    )
    save_corpus(corpus, writer.path("corpus.jsonl"), format="jsonl")
    writer.write_run_record("synth", {**resolved, "seed": seed},
                            {"corpus.jsonl": corpus_sha256(corpus)})
    return 0


def cmd_split(args) -> int:
    settings = Settings(args, {"format": "jsonl", "ratios": [0.8, 0.1, 0.1]})
    corpus_path = settings.require("corpus")
    fmt = settings.get("format")
    ratios = [float(r) for r in settings.get("ratios")]
    seed = int(settings.get("seed", 0) or 0)

    writer = ArtifactWriter(args.out, args.overwrite)
    corpus = load_corpus(corpus_path, format=fmt)
    manifest = stratified_split(corpus, ratios=tuple(ratios), seed=seed)
    manifest.save(writer.path("manifest.json"))
    config = {"corpus": str(corpus_path), "format": fmt, "ratios": ratios, "seed": seed}
    writer.write_run_record("split", config, {"corpus": corpus_sha256(corpus)})
    return 0


def _write_train_outputs(writer: ArtifactWriter, prefix: str, result) -> dict:
    writer.path(f"{prefix}.json")
    writer.path(f"{prefix}.bin")
    save_checkpoint(result.model, writer.out_dir / prefix)
    writer.write_text(f"{prefix}_history.csv", result.history.to_csv())
    summary = result.history.summary()
    summary["best_val_accuracy"] = result.best_val_accuracy
    return summary


def cmd_train(args) -> int:
    settings = Settings(args, {**TRAIN_DEFAULTS, **MODEL_DEFAULTS,
                               "format": "jsonl", "with_baseline": False})
    corpus_path = settings.require("corpus")
    manifest_path = settings.require("manifest")
    fmt = settings.get("format")
    seed = int(settings.get("seed", 0) or 0)
    with_baseline = bool(settings.get("with_baseline"))
    resolved = settings.resolved({**TRAIN_DEFAULTS, **MODEL_DEFAULTS})

    corpus = load_corpus(corpus_path, format=fmt)
    manifest = SplitManifest.load(manifest_path)
    splits = _split_corpora(corpus, manifest)
    if not splits["train"].documents:
        raise ValueError("manifest has an empty training split")
    val = splits["val"] if splits["val"].documents else None

    model_cfg = _model_config(resolved)
    train_cfg = _train_config(resolved, seed)
    init_seed = _derive_seed("model-init", seed)

    writer = ArtifactWriter(args.out, args.overwrite)
    writer.precheck("model.json", "model.bin", "model_history.csv", "summary.json")
    if with_baseline:
        writer.precheck("baseline.json", "baseline.bin", "baseline_history.csv")

    result = _fit_model(splits["train"], val, model_cfg, train_cfg, init_seed)
    summary = {"joint": _write_train_outputs(writer, "model", result)}

    if with_baseline:
        baseline_cfg = _train_config({**resolved, "lam": 0.0}, seed)
        baseline = _fit_model(splits["train"], val, model_cfg, baseline_cfg, init_seed)
        summary["baseline"] = _write_train_outputs(writer, "baseline", baseline)

    writer.write_json("summary.json", summary)
    snapshot = {**resolved, "seed": seed, "corpus": str(corpus_path),
                "manifest": str(manifest_path), "with_baseline": with_baseline}
    writer.write_run_record("train", snapshot, {"corpus": corpus_sha256(corpus)})
    return 0


def _metrics_payload(cm: ConfusionMatrix) -> dict:
    report = macro_metrics(cm)
    payload = report.to_dict()
    payload["authors"] = cm.authors
    payload["total_documents"] = cm.total
    return payload


def cmd_eval(args) -> int:
    settings = Settings(args, {"format": "jsonl", "split": "test"})
    corpus_path = settings.require("corpus")
    checkpoint = settings.require("checkpoint")
    fmt = settings.get("format")
    split = settings.get("split")
    manifest_path = settings.get("manifest")
    baseline_ckpt = settings.get("baseline_checkpoint")

    corpus = load_corpus(corpus_path, format=fmt)
    if manifest_path:
        docs = _split_corpora(corpus, SplitManifest.load(manifest_path))[split]
    else:
        docs = corpus
    if not docs.documents:
        raise ValueError(f"split {split!r} holds no documents")

    model = load_checkpoint(checkpoint)
    preds, _ = evaluate(model, docs)
    true_ids = docs.label_ids()
    cm = ConfusionMatrix.from_predictions(true_ids, preds, model.authors)

    writer = ArtifactWriter(args.out, args.overwrite)
    writer.write_json("metrics.json", _metrics_payload(cm))
    writer.write_text("confusion.csv", matrix_csv(cm.authors, cm.counts))

    if baseline_ckpt:
        baseline = load_checkpoint(baseline_ckpt)
        base_preds, _ = evaluate(baseline, docs)
        base_cm = ConfusionMatrix.from_predictions(true_ids, base_preds, baseline.authors)
        writer.write_json("baseline_metrics.json", _metrics_payload(base_cm))
        writer.write_text("baseline_confusion.csv", matrix_csv(base_cm.authors, base_cm.counts))
        writer.write_text("relative_confusion.csv",
                          matrix_csv(cm.authors, relative_confusion(cm, base_cm)))

    config = {"checkpoint": str(checkpoint), "baseline_checkpoint": baseline_ckpt,
              "corpus": str(corpus_path), "manifest": manifest_path, "split": split}
    writer.write_run_record("eval", config, {"corpus": corpus_sha256(corpus)})
    return 0


def cmd_data_regimes(args) -> int:
    settings = Settings(args, {**TRAIN_DEFAULTS, **MODEL_DEFAULTS, "format": "jsonl",
                               "fractions": [0.25, 0.5, 0.75, 1.0]})
    corpus_path = settings.require("corpus")
    manifest_path = settings.require("manifest")
    fmt = settings.get("format")
    seed = int(settings.get("seed", 0) or 0)
    fractions = [float(f) for f in settings.get("fractions")]
    for fraction in fractions:
        if not 0.0 < fraction <= 1.0:
            raise ValueError(f"fractions must lie in (0, 1], got {fraction}")
    resolved = settings.resolved({**TRAIN_DEFAULTS, **MODEL_DEFAULTS})

    corpus = load_corpus(corpus_path, format=fmt)
    manifest = SplitManifest.load(manifest_path)
    splits = _split_corpora(corpus, manifest)
    val = splits["val"] if splits["val"].documents else None
    test = splits["test"]
    if not test.documents:
        raise ValueError("data-regimes needs a non-empty test split")

    model_cfg = _model_config(resolved)
    writer = ArtifactWriter(args.out, args.overwrite)
    rows = []
    for fraction in fractions:
        if fraction == 1.0:
            train_part = splits["train"]
        else:
            train_part = stratified_subsample(
                splits["train"], fraction, seed=_derive_seed("subsample", seed, fraction)
            )
        for kind, lam in (("joint", float(resolved["lam"])), ("baseline", 0.0)):
            cell_cfg = _train_config({**resolved, "lam": lam}, seed)
            result = _fit_model(train_part, val, model_cfg, cell_cfg,
                                _derive_seed("model-init", seed))
            preds, _ = evaluate(result.model, test)
            rows.append([float(fraction), kind, accuracy(preds, test.label_ids())])
    writer.write_text("regimes.csv", csv_text(["fraction", "model", "test_accuracy"], rows))
    snapshot = {**resolved, "seed": seed, "fractions": fractions,
                "corpus": str(corpus_path), "manifest": str(manifest_path)}
    writer.write_run_record("data-regimes", snapshot, {"corpus": corpus_sha256(corpus)})
    return 0


def _pair_accuracy_rows(pairs, cms: dict[str, ConfusionMatrix]) -> list[list]:
    rows = []
    for author_a, author_b, pd_value in pairs:
        for kind, cm in cms.items():
            i = cm.authors.index(author_a)
            j = cm.authors.index(author_b)
            samples_a = int(cm.counts[i].sum())
            samples_b = int(cm.counts[j].sum())
            correct_a = int(cm.counts[i, i])
            correct_b = int(cm.counts[j, j])
            pair_total = samples_a + samples_b
            pair_acc = (correct_a + correct_b) / pair_total if pair_total else 0.0
            rows.append([author_a, author_b, float(pd_value), kind,
                         samples_a, correct_a, samples_b, correct_b, pair_acc])
    return rows


def cmd_analyze(args) -> int:
    settings = Settings(args, {**ANALYZE_DEFAULTS, "format": "jsonl"})
    corpus_paths = settings.require("corpus")
    if isinstance(corpus_paths, str):
        corpus_paths = [corpus_paths]
    fmt = settings.get("format")
    seed = int(settings.get("seed", 0) or 0)
    resolved = settings.resolved(ANALYZE_DEFAULTS)
    manifest_path = settings.get("manifest")
    checkpoint = settings.get("checkpoint")
    baseline_ckpt = settings.get("baseline_checkpoint")

    corpora = [(str(path), load_corpus(path, format=fmt)) for path in corpus_paths]
    primary_name, primary = corpora[0]

    writer = ArtifactWriter(args.out, args.overwrite)
    profile_cfg = ProfileConfig(
        k_per_order=int(resolved["k_per_order"]),
        lda_topics=int(resolved["lda_topics"]),
        lda_iterations=int(resolved["lda_iterations"]),
        lda_infer_iterations=int(resolved["lda_infer_iterations"]),
        seed=seed,
    )

    reports: dict[str, DistanceReport] = {
        name: analyze_corpus(corpus, profile_cfg) for name, corpus in corpora
    }
    raw_rows = {name: report.raw_dissimilarity for name, report in reports.items()}
    scaled_rows = scale_dissimilarity_columns(raw_rows)
    dissim_rows = []
    for name in raw_rows:
        for feature in sorted(raw_rows[name]):
            dissim_rows.append([name, feature, raw_rows[name][feature], scaled_rows[name][feature]])
    writer.write_text("dissimilarity.csv", csv_text(["corpus", "feature", "raw", "scaled"], dissim_rows))

    primary_report = reports[primary_name]
    writer.write_text("pd_matrix.csv", matrix_csv(primary_report.authors, primary_report.pd))
    for feature, matrix in primary_report.feature_matrices.items():
        writer.write_text(f"feature_{feature}_matrix.csv", matrix_csv(primary_report.authors, matrix))
    pairs = primary_report.most_similar_pairs(int(resolved["top_pairs"]))
    writer.write_text(
        "top_pairs.csv",
        csv_text(["author_1", "author_2", "pd"], [[a, b, v] for a, b, v in pairs]),
    )

    if resolved["export_features"]:
        word_vocab = build_ngram_vocab(primary, "word", (1, 2, 3), profile_cfg.k_per_order)
        char_vocab = build_ngram_vocab(primary, "char", (2, 3), profile_cfg.k_per_order)
        lda_model = fit_lda(primary, num_topics=profile_cfg.lda_topics,
                            iterations=profile_cfg.lda_iterations, seed=seed)
        extractors = {
            "content": lambda d: content_features(d, word_vocab),
            "style": style_features,
            "hybrid": lambda d: hybrid_features(d, char_vocab),
            "topic": lambda d: topic_features(d, lda_model, profile_cfg.lda_infer_iterations),
        }
        for feature, extractor in extractors.items():
            writer.write_text(f"features_{feature}.csv", feature_matrix_csv(primary, extractor))

    summary: dict = {
        "corpora": {name: {"authors": reports[name].authors,
                           "raw_dissimilarity": reports[name].raw_dissimilarity,
                           "scaled_dissimilarity": scaled_rows[name]}
                    for name in reports},
        "top_pairs": [[a, b, v] for a, b, v in pairs],
    }

    if checkpoint:
        model = load_checkpoint(checkpoint)
        if manifest_path:
            docs = _split_corpora(primary, SplitManifest.load(manifest_path))[resolved["split"]]
        else:
            docs = primary
        preds, embeddings = evaluate(model, docs)
        true_ids = docs.label_ids()
        coords = project_embeddings(embeddings, seed=seed)
        proj_rows = [[doc.id, doc.author, float(coords[i, 0]), float(coords[i, 1])]
                     for i, doc in enumerate(docs.documents)]
        writer.write_text("projection.csv", csv_text(["id", "author", "x", "y"], proj_rows))
        intra, inter = cluster_quality(embeddings, true_ids)
        summary["cluster_quality"] = {"intra_cosine": intra, "inter_cosine": inter,
                                      "gap": intra - inter}
        summary["checkpoint_accuracy"] = accuracy(preds, true_ids)
        cms = {"joint": ConfusionMatrix.from_predictions(true_ids, preds, model.authors)}
        if baseline_ckpt:
            baseline = load_checkpoint(baseline_ckpt)
            base_preds, base_embeddings = evaluate(baseline, docs)
            cms["baseline"] = ConfusionMatrix.from_predictions(true_ids, base_preds, baseline.authors)
            writer.write_text("relative_confusion.csv",
                              matrix_csv(model.authors, relative_confusion(cms["joint"], cms["baseline"])))
            base_intra, base_inter = cluster_quality(base_embeddings, true_ids)
            summary["baseline_cluster_quality"] = {"intra_cosine": base_intra,
                                                   "inter_cosine": base_inter,
                                                   "gap": base_intra - base_inter}
            summary["baseline_accuracy"] = accuracy(base_preds, true_ids)
            writer.write_text(
                "pair_accuracy.csv",
                csv_text(
                    ["author_1", "author_2", "pd", "model",
                     "samples_1", "correct_1", "samples_2", "correct_2", "pair_accuracy"],
                    _pair_accuracy_rows(pairs, cms),
                ),
            )

    writer.write_json("summary.json", summary)
    config = {**resolved, "corpora": [name for name, _ in corpora], "seed": seed,
              "manifest": manifest_path, "checkpoint": checkpoint,
              "baseline_checkpoint": baseline_ckpt}
    writer.write_run_record("analyze", config,
                            {name: corpus_sha256(c) for name, c in corpora})
    return 0


def cmd_project(args) -> int:
    settings = Settings(args, {"format": "jsonl", "split": "test"})
    corpus_path = settings.require("corpus")
    checkpoint = settings.require("checkpoint")
    fmt = settings.get("format")
    split = settings.get("split")
    manifest_path = settings.get("manifest")
    seed = int(settings.get("seed", 0) or 0)

    corpus = load_corpus(corpus_path, format=fmt)
    if manifest_path:
        docs = _split_corpora(corpus, SplitManifest.load(manifest_path))[split]
    else:
        docs = corpus
    model = load_checkpoint(checkpoint)
    _, embeddings = evaluate(model, docs)
    coords = project_embeddings(embeddings, seed=seed)
    writer = ArtifactWriter(args.out, args.overwrite)
    rows = [[doc.id, doc.author, float(coords[i, 0]), float(coords[i, 1])]
            for i, doc in enumerate(docs.documents)]
    writer.write_text("projection.csv", csv_text(["id", "author", "x", "y"], rows))
    config = {"checkpoint": str(checkpoint), "corpus": str(corpus_path),
              "manifest": manifest_path, "split": split, "seed": seed}
    writer.write_run_record("project", config, {"corpus": corpus_sha256(corpus)})
    return 0


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--overwrite", action="store_true", help="replace existing artifacts")
    parser.add_argument("--seed", type=int, default=None, help="root random seed (default 0)")
    parser.add_argument("--config", help="json config file; explicit flags win")


def _add_corpus_args(parser: argparse.ArgumentParser):
    parser.add_argument("--corpus", help="corpus file path")
    parser.add_argument("--format", choices=("jsonl", "csv"), default=None)


def _add_train_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--lr", type=float)
    parser.add_argument("--lr-min", type=float, dest="lr_min")
    parser.add_argument("--weight-decay", type=float, dest="weight_decay")
    parser.add_argument("--tau", type=float, help="contrastive temperature")
    parser.add_argument("--lambda", type=float, dest="lam", help="contrastive loss weight")
    parser.add_argument("--exclude-self", action="store_const", const=True, dest="exclude_self",
                        help="drop the self-pair from the contrastive sums")
    parser.add_argument("--sampler", choices=("shuffle", "class_balanced"))
    parser.add_argument("--balanced-authors", type=int, dest="balanced_authors")
    parser.add_argument("--balanced-docs", type=int, dest="balanced_docs")
    parser.add_argument("--vocab-cap", type=int, dest="vocab_cap")
    parser.add_argument("--d-tok", type=int, dest="d_tok")
    parser.add_argument("--d-h", type=int, dest="d_h")
    parser.add_argument("--d-e", type=int, dest="d_e")
    parser.add_argument("--d-h2", type=int, dest="d_h2")
    parser.add_argument("--dropout", type=float)
    parser.add_argument("--max-len", type=int, dest="max_len")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="authorkit",
                                     description="authorship attribution pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--authors", type=int)
    p.add_argument("--docs-per-author", type=int, dest="docs_per_author")
    p.add_argument("--doc-length", type=int, dest="doc_length")
    p.add_argument("--vocab-size", type=int, dest="vocab_size")
    p.add_argument("--skew", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="write a stratified split manifest")
    _add_corpus_args(p)
    p.add_argument("--ratios", type=float, nargs=3, default=None,
                   metavar=("TRAIN", "VAL", "TEST"))
    _add_common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the joint model (optionally plus a baseline)")
    _add_corpus_args(p)
    p.add_argument("--manifest")
    p.add_argument("--with-baseline", action="store_const", const=True, dest="with_baseline",
                   help="also train a lambda=0 baseline under the same seed")
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    _add_corpus_args(p)
    p.add_argument("--manifest")
    p.add_argument("--split", choices=("train", "val", "test"), default=None)
    p.add_argument("--checkpoint", help="checkpoint base path (without .json/.bin)")
    p.add_argument("--baseline-checkpoint", dest="baseline_checkpoint",
                   help="second checkpoint; also emit the relative confusion matrix")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("data-regimes", help="accuracy vs training-set fraction")
    _add_corpus_args(p)
    p.add_argument("--manifest")
    p.add_argument("--fractions", type=float, nargs="+", default=None,
                   help="training fractions (default 0.25 0.5 0.75 1.0)")
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_data_regimes)

    p = sub.add_parser("analyze", help="stylometric distance report and model comparison")
    p.add_argument("--corpus", action="append",
                   help="corpus file; repeat to compare corpora (first is primary)")
    p.add_argument("--format", choices=("jsonl", "csv"), default=None)
    p.add_argument("--manifest")
    p.add_argument("--split", choices=("train", "val", "test"), default=None)
    p.add_argument("--checkpoint", help="embed/evaluate documents with this model")
    p.add_argument("--baseline-checkpoint", dest="baseline_checkpoint")
    p.add_argument("--top-pairs", type=int, dest="top_pairs")
    p.add_argument("--k-per-order", type=int, dest="k_per_order")
    p.add_argument("--lda-topics", type=int, dest="lda_topics")
    p.add_argument("--lda-iterations", type=int, dest="lda_iterations")
    p.add_argument("--lda-infer-iterations", type=int, dest="lda_infer_iterations")
    p.add_argument("--export-features", action="store_const", const=True, dest="export_features",
                   help="write per-document feature matrices for the primary corpus")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("project", help="2-D projection of document embeddings")
    _add_corpus_args(p)
    p.add_argument("--manifest")
    p.add_argument("--split", choices=("train", "val", "test"), default=None)
    p.add_argument("--checkpoint")
    _add_common(p)
    p.set_defaults(func=cmd_project)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # single-line, machine-parseable failure
        message = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
