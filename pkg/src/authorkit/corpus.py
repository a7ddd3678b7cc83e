"""Labeled text corpora: loading, validation, splitting, subsampling.

A corpus is an ordered list of (id, text, author) documents plus an author
index assigning contiguous integer ids in first-appearance order. All
randomized operations are pure functions of (input, seed).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    author: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"document {self.id!r}: text is empty")
        if not self.author:
            raise ValueError(f"document {self.id!r}: author is empty")


@dataclass
class Corpus:
    documents: list[Document]
    authors: list[str]
    author_index: dict[str, int]

    @classmethod
    def from_documents(cls, documents: list[Document]) -> "Corpus":
        """Build a corpus with author ids assigned in first-appearance order."""
        seen_ids = set()
        authors: list[str] = []
        index: dict[str, int] = {}
        for doc in documents:
            if doc.id in seen_ids:
                raise ValueError(f"duplicate document id {doc.id!r}")
            seen_ids.add(doc.id)
            if doc.author not in index:
                index[doc.author] = len(authors)
                authors.append(doc.author)
        return cls(documents=list(documents), authors=authors, author_index=index)

    @property
    def num_authors(self) -> int:
        return len(self.authors)

    def label_ids(self) -> np.ndarray:
        """Integer author id per document, in document order."""
        return np.array([self.author_index[d.author] for d in self.documents], dtype=np.int64)

    def docs_by_author(self) -> dict[str, list[int]]:
        """Author label -> positions of that author's documents."""
        out: dict[str, list[int]] = {a: [] for a in self.authors}
        for pos, doc in enumerate(self.documents):
            out[doc.author].append(pos)
        return out

    def subset(self, ids: list[str]) -> "Corpus":
        """Sub-corpus containing the named documents, authors/index preserved."""
        by_id = {d.id: d for d in self.documents}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise ValueError(f"unknown document ids: {missing[:5]}")
        docs = [by_id[i] for i in ids]
        return Corpus(documents=docs, authors=list(self.authors), author_index=dict(self.author_index))


@dataclass
class SplitManifest:
    ratios: tuple[float, float, float]
    seed: int
    train: list[str]
    val: list[str]
    test: list[str]

    def splits(self) -> dict[str, list[str]]:
        return {"train": self.train, "val": self.val, "test": self.test}

    def to_json(self) -> str:
        obj = {
            "ratios": list(self.ratios),
            "seed": self.seed,
            "train": self.train,
            "val": self.val,
            "test": self.test,
        }
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SplitManifest":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        ratios = tuple(float(r) for r in obj["ratios"])
        if len(ratios) != 3:
            raise ValueError("manifest ratios must have exactly 3 entries")
        return cls(
            ratios=ratios,
            seed=int(obj["seed"]),
            train=list(obj["train"]),
            val=list(obj["val"]),
            test=list(obj["test"]),
        )


def _document_from_record(record: dict, where: str, default_id: str) -> Document:
    for key in ("text", "author"):
        if key not in record or record[key] in (None, ""):
            raise ValueError(f"{where}: missing field {key!r}")
    doc_id = record.get("id") or default_id
    if not isinstance(record["text"], str) or not isinstance(record["author"], str):
        raise ValueError(f"{where}: 'text' and 'author' must be strings")
    try:
        return Document(id=str(doc_id), text=record["text"], author=record["author"])
    except ValueError as exc:
        raise ValueError(f"{where}: {exc}") from exc


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Load a corpus from a jsonl or csv file.

    jsonl records carry "text" and "author" plus an optional "id"
    (autogenerated as "doc-<line>" when absent). csv files carry a
    header row id,text,author with RFC-4180 quoting.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    if format not in ("jsonl", "csv"):
        raise ValueError(f"unsupported corpus format {format!r}")

    documents: list[Document] = []
    seen: dict[str, int] = {}
    if format == "jsonl":
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                where = f"{path.name}: line {lineno}"
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{where}: invalid json ({exc.msg})") from exc
                if not isinstance(record, dict):
                    raise ValueError(f"{where}: record is not an object")
                doc = _document_from_record(record, where, default_id=f"doc-{lineno}")
                if doc.id in seen:
                    raise ValueError(f"{where}: duplicate document id {doc.id!r} (first at line {seen[doc.id]})")
                seen[doc.id] = lineno
                documents.append(doc)
    else:
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"text", "author"} <= set(reader.fieldnames):
                raise ValueError(f"{path.name}: csv header must contain id,text,author")
            for recno, row in enumerate(reader, start=1):
                where = f"{path.name}: record {recno}"
                doc = _document_from_record(row, where, default_id=f"doc-{recno}")
                if doc.id in seen:
                    raise ValueError(f"{where}: duplicate document id {doc.id!r}")
                seen[doc.id] = recno
                documents.append(doc)

    if not documents:
        raise ValueError(f"{path.name}: empty corpus")
    return Corpus.from_documents(documents)


def corpus_to_jsonl(corpus: Corpus) -> str:
    lines = []
    for doc in corpus.documents:
        lines.append(json.dumps({"id": doc.id, "text": doc.text, "author": doc.author}, sort_keys=True))
    return "\n".join(lines) + "\n"


def save_corpus(corpus: Corpus, path: str | Path, format: str = "jsonl") -> None:
    path = Path(path)
    if format == "jsonl":
        path.write_text(corpus_to_jsonl(corpus), encoding="utf-8")
    elif format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["id", "text", "author"])
        for doc in corpus.documents:
            writer.writerow([doc.id, doc.text, doc.author])
        path.write_text(buf.getvalue(), encoding="utf-8")
    else:
        raise ValueError(f"unsupported corpus format {format!r}")


def corpus_sha256(corpus: Corpus) -> str:
    """Checksum of the canonical jsonl serialization."""
    return hashlib.sha256(corpus_to_jsonl(corpus).encode("utf-8")).hexdigest()


def _allocate_counts(n: int, ratios: tuple[float, float, float]) -> list[int]:
    """Per-split document counts for one author with n documents.

    Floor allocation; leftover documents go to splits in descending-ratio
    order (original split order on ties). Splits with a positive ratio are
    then guaranteed at least one document, donated by the most-loaded split.
    """
    counts = [math.floor(r * n) for r in ratios]
    remainder = n - sum(counts)
    priority = sorted(range(3), key=lambda i: (-ratios[i], i))
    for i in priority:
        if remainder == 0:
            break
        if ratios[i] > 0:
            counts[i] += 1
            remainder -= 1
    for i in priority:
        if ratios[i] > 0 and counts[i] == 0:
            donor = max(priority, key=lambda j: counts[j])
            counts[donor] -= 1
            counts[i] += 1
    return counts


def stratified_split(
    corpus: Corpus,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> SplitManifest:
    """Per-author train/val/test split, deterministic given seed.

    Every author contributes at least one document to each split with a
    positive ratio; the id lists partition the corpus.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ValueError("ratios must have exactly 3 entries (train, val, test)")
    if any(r < 0 for r in ratios):
        raise ValueError("ratios must be non-negative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    num_positive = sum(1 for r in ratios if r > 0)

    rng = np.random.default_rng(seed)
    split_ids: dict[str, list[tuple[int, str]]] = {name: [] for name in SPLIT_NAMES}
    by_author = corpus.docs_by_author()
    for author in corpus.authors:
        positions = by_author[author]
        if len(positions) < num_positive:
            raise ValueError(
                f"author {author!r} has {len(positions)} document(s), too few to "
                f"populate {num_positive} non-empty split(s)"
            )
        counts = _allocate_counts(len(positions), ratios)
        shuffled = list(rng.permutation(positions))
        start = 0
        for name, count in zip(SPLIT_NAMES, counts):
            for pos in shuffled[start : start + count]:
                split_ids[name].append((int(pos), corpus.documents[int(pos)].id))
            start += count

    def ordered(name: str) -> list[str]:
        return [doc_id for _, doc_id in sorted(split_ids[name])]

    return SplitManifest(
        ratios=ratios,
        seed=int(seed),
        train=ordered("train"),
        val=ordered("val"),
        test=ordered("test"),
    )


def stratified_subsample(corpus: Corpus, fraction: float, seed: int = 0) -> Corpus:
    """Keep round(fraction * count) documents per author (minimum 1).

    Rounds half up. The author set and index are unchanged; document order
    follows the original corpus. Deterministic given seed.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    keep: list[int] = []
    by_author = corpus.docs_by_author()
    for author in corpus.authors:
        positions = by_author[author]
        k = max(1, math.floor(fraction * len(positions) + 0.5))
        k = min(k, len(positions))
        chosen = rng.choice(len(positions), size=k, replace=False)
        keep.extend(positions[i] for i in chosen)
    keep.sort()
    docs = [corpus.documents[i] for i in keep]
    return Corpus(documents=docs, authors=list(corpus.authors), author_index=dict(corpus.author_index))


def generate_synthetic_corpus(
    num_authors: int,
    docs_per_author: int,
    doc_length: int,
    vocab_size: int,
    skew: float,
    seed: int = 0,
) -> Corpus:
    """Synthetic corpus with controllable inter-author vocabulary overlap.

    Each author samples tokens from a mixture (by `skew`) of a uniform
    distribution over the shared vocabulary and a uniform distribution over
    an author-private, pairwise-disjoint vocabulary slice. skew=0 makes all
    authors identical; skew=1 makes their vocabularies disjoint.
    """
    for name, value in (("num_authors", num_authors), ("docs_per_author", docs_per_author),
                        ("doc_length", doc_length), ("vocab_size", vocab_size)):
        if value < 1:
            raise ValueError(f"{name} must be positive, got {value}")
    if not 0.0 <= skew <= 1.0:
        raise ValueError(f"skew must be in [0, 1], got {skew}")
    if vocab_size < num_authors:
        raise ValueError(f"vocab_size {vocab_size} < num_authors {num_authors}: private slices impossible")

    vocab = [f"w{i:05d}" for i in range(vocab_size)]
    slice_size = vocab_size // num_authors
    rng = np.random.default_rng(seed)
    documents: list[Document] = []
    for k in range(num_authors):
        probs = np.full(vocab_size, (1.0 - skew) / vocab_size)
        probs[k * slice_size : (k + 1) * slice_size] += skew / slice_size
        probs /= probs.sum()
        author = f"a{k:03d}"
        for j in range(docs_per_author):
            token_ids = rng.choice(vocab_size, size=doc_length, p=probs)
            text = " ".join(vocab[t] for t in token_ids)
            documents.append(Document(id=f"{author}-d{j:05d}", text=text, author=author))
    return Corpus.from_documents(documents)
