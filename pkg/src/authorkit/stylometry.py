"""Stylometric feature extractors: content, style, hybrid, and author means.

All extractors are pure functions of (document, vocabulary). The word
tokenizer (lowercase, split on non-alphanumeric runs) is shared by every
word-level consumer in the package so features stay mutually consistent.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .corpus import Corpus, Document

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Fixed 150-entry English function-word list; kept verbatim so feature
# vectors are reproducible across installations.
FUNCTION_WORDS = (
    "a", "about", "above", "after", "again", "against", "all", "am",
    "an", "and", "any", "are", "around", "as", "at", "be",
    "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "cannot", "could", "did", "do", "does", "doing",
    "down", "during", "each", "either", "every", "few", "for", "from",
    "further", "had", "has", "have", "having", "he", "her", "hers",
    "herself", "him", "himself", "his", "how", "i", "if", "in",
    "into", "is", "it", "its", "itself", "just", "may", "me",
    "might", "mine", "more", "most", "much", "must", "my", "myself",
    "near", "neither", "no", "nor", "not", "nothing", "now", "of",
    "off", "on", "once", "one", "only", "onto", "or", "other",
    "ought", "our", "ours", "ourselves", "out", "over", "own", "shall",
    "she", "should", "since", "so", "some", "someone", "something", "such",
    "than", "that", "the", "their", "theirs", "them", "themselves", "then",
    "there", "these", "they", "this", "those", "through", "to", "too",
    "toward", "under", "until", "up", "upon", "us", "very", "was",
    "we", "were", "what", "when", "where", "whether", "which", "while",
    "who", "whom", "whose", "why", "will", "with", "within", "without",
    "would", "you", "your", "yours", "yourself", "yourselves",
)

PUNCTUATION_MARKS = (".", ",", ";", ":", "!", "?", "'", '"', "(", ")", "-")

STYLE_DIMENSION = 4 + 26 + 10 + 1 + len(FUNCTION_WORDS) + len(PUNCTUATION_MARKS)

SHORT_WORD_MAX_LEN = 3


def word_tokens(text: str) -> list[str]:
    """Lowercased alphanumeric runs, in order of appearance."""
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class FeatureVector:
    feature_type: str  # content | style | hybrid | topic
    values: np.ndarray
    flag: str | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.feature_type} feature vector has non-finite entries")
        if self.feature_type == "topic":
            if np.any(values < 0) or abs(values.sum() - 1.0) > 1e-9:
                raise ValueError("topic feature vector must be a probability distribution")

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class AuthorFeature:
    author: str
    feature_type: str
    vector: FeatureVector


@dataclass
class NgramVocabulary:
    """Top n-grams per order over a whole corpus.

    Entries are sorted by (order, descending corpus frequency, lexicographic
    tie-break), at most k_per_order entries per order.
    """

    unit: str  # word | char
    orders: tuple[int, ...]
    entries: list[tuple[str, int]]
    k_per_order: int

    @property
    def dimension(self) -> int:
        return len(self.entries)

    def checksum(self) -> str:
        payload = "\n".join(f"{gram}\t{order}" for gram, order in self.entries)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _ngrams(items: str | list[str], order: int) -> Iterable:
    if order == 1 and isinstance(items, list):
        return items
    n = len(items)
    if isinstance(items, list):
        return (tuple(items[i : i + order]) for i in range(n - order + 1))
    return (items[i : i + order] for i in range(n - order + 1))


def _doc_units(doc: Document, unit: str) -> str | list[str]:
    if unit == "word":
        return word_tokens(doc.text)
    return doc.text.lower()


def build_ngram_vocab(
    corpus: Corpus,
    unit: str,
    orders: Iterable[int],
    k_per_order: int = 1000,
) -> NgramVocabulary:
    """Most frequent n-grams of each order over the whole corpus.

    Word n-grams come from the shared word tokenizer; char n-grams are
    computed on the raw lowercased text including spaces.
    """
    if unit not in ("word", "char"):
        raise ValueError(f"unit must be 'word' or 'char', got {unit!r}")
    orders = tuple(sorted(set(int(o) for o in orders)))
    if not orders or any(o < 1 for o in orders):
        raise ValueError("orders must be a non-empty set of positive integers")
    if k_per_order < 1:
        raise ValueError("k_per_order must be positive")
    if not corpus.documents:
        raise ValueError("empty corpus")

    entries: list[tuple[str, int]] = []
    for order in orders:
        counts: Counter = Counter()
        for doc in corpus.documents:
            counts.update(_ngrams(_doc_units(doc, unit), order))
        top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k_per_order]
        for gram, _ in top:
            text = gram if isinstance(gram, str) else " ".join(gram)
            entries.append((text, order))
    return NgramVocabulary(unit=unit, orders=orders, entries=entries, k_per_order=k_per_order)


def _ngram_relative_frequencies(doc: Document, vocab: NgramVocabulary) -> np.ndarray:
    units = _doc_units(doc, vocab.unit)
    values = np.zeros(vocab.dimension)
    counts_by_order: dict[int, Counter] = {}
    totals: dict[int, int] = {}
    for order in vocab.orders:
        grams = list(_ngrams(units, order))
        totals[order] = len(grams)
        counts_by_order[order] = Counter(grams)
    for idx, (gram_text, order) in enumerate(vocab.entries):
        total = totals[order]
        if total == 0:
            continue
        key = gram_text if vocab.unit == "char" else (
            gram_text if order == 1 else tuple(gram_text.split(" "))
        )
        values[idx] = counts_by_order[order][key] / total
    return values


def content_features(doc: Document, vocab: NgramVocabulary) -> FeatureVector:
    """Relative frequencies of the vocabulary's word n-grams in one document."""
    if vocab.unit != "word":
        raise ValueError(f"content features need a word vocabulary, got unit={vocab.unit!r}")
    return FeatureVector("content", _ngram_relative_frequencies(doc, vocab))


def hybrid_features(doc: Document, vocab: NgramVocabulary) -> FeatureVector:
    """Relative frequencies of the vocabulary's character n-grams in one document."""
    if vocab.unit != "char":
        raise ValueError(f"hybrid features need a char vocabulary, got unit={vocab.unit!r}")
    return FeatureVector("hybrid", _ngram_relative_frequencies(doc, vocab))


def style_features(doc: Document) -> FeatureVector:
    """Fixed 202-dimensional writing-style profile of one document.

    Layout: [avg word length; short-word fraction; digit fraction of
    characters; uppercase fraction of letters; 26 letter frequencies;
    10 digit frequencies; type-token ratio; 150 function-word frequencies;
    11 punctuation frequencies].
    """
    text = doc.text
    words = word_tokens(text)
    n_words = len(words)
    n_chars = len(text)

    letters = [c for c in text if c.isascii() and c.isalpha()]
    n_letters = len(letters)
    uppercase = sum(1 for c in letters if c.isupper())
    digits = [c for c in text if c.isdigit() and c.isascii()]
    n_digits = len(digits)

    avg_word_len = sum(len(w) for w in words) / n_words if n_words else 0.0
    short_frac = sum(1 for w in words if len(w) <= SHORT_WORD_MAX_LEN) / n_words if n_words else 0.0
    digit_frac = n_digits / n_chars if n_chars else 0.0
    upper_frac = uppercase / n_letters if n_letters else 0.0

    letter_freq = np.zeros(26)
    for c in letters:
        letter_freq[ord(c.lower()) - ord("a")] += 1
    if n_letters:
        letter_freq /= n_letters

    digit_freq = np.zeros(10)
    for c in digits:
        digit_freq[ord(c) - ord("0")] += 1
    if n_digits:
        digit_freq /= n_digits

    richness = len(set(words)) / n_words if n_words else 0.0

    word_counts = Counter(words)
    func_freq = np.array([word_counts[w] / n_words if n_words else 0.0 for w in FUNCTION_WORDS])

    punct_freq = np.array([text.count(p) / n_chars if n_chars else 0.0 for p in PUNCTUATION_MARKS])

    values = np.concatenate([
        [avg_word_len, short_frac, digit_frac, upper_frac],
        letter_freq,
        digit_freq,
        [richness],
        func_freq,
        punct_freq,
    ])
    assert values.shape[0] == STYLE_DIMENSION
    return FeatureVector("style", values)


def feature_matrix_csv(corpus: Corpus, extractor: Callable[[Document], FeatureVector]) -> str:
    """Per-document feature matrix as csv: id, author, then numbered columns."""
    lines = []
    dimension = None
    for doc in corpus.documents:
        fv = extractor(doc)
        if dimension is None:
            dimension = fv.dimension
            lines.append("id,author," + ",".join(f"f{i}" for i in range(dimension)))
        row = ",".join(repr(float(x)) for x in fv.values)

        def escape(cell: str) -> str:
            if any(c in cell for c in ',"\n'):
                return '"' + cell.replace('"', '""') + '"'
            return cell

        lines.append(f"{escape(doc.id)},{escape(doc.author)},{row}")
    if dimension is None:
        raise ValueError("empty corpus")
    return "\n".join(lines) + "\n"


def author_representation(
    corpus: Corpus,
    author: str,
    extractor: Callable[[Document], FeatureVector],
) -> AuthorFeature:
    """Arithmetic mean of the per-document feature vectors of one author."""
    if author not in corpus.author_index:
        raise ValueError(f"unknown author {author!r}")
    vectors = [extractor(doc) for doc in corpus.documents if doc.author == author]
    if not vectors:
        raise ValueError(f"author {author!r} has no documents")
    feature_type = vectors[0].feature_type
    mean = np.mean([v.values for v in vectors], axis=0)
    return AuthorFeature(author=author, feature_type=feature_type, vector=FeatureVector(feature_type, mean))
