"""Evaluation and author-distance analysis.

Covers classification metrics (accuracy, macro precision/recall/F1,
class-accuracy variance), confusion-matrix algebra including the relative
confusion matrix of two models, stylometric author/dataset distances with a
JSD branch for topic features, normalized pairwise author distances, 2-D
PCA projection of embeddings, and a cosine cluster-quality proxy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .lda import fit_lda, topic_features
from .stylometry import (
    AuthorFeature,
    FeatureVector,
    build_ngram_vocab,
    content_features,
    hybrid_features,
    style_features,
)

FEATURE_TYPES = ("content", "style", "hybrid", "topic")


# ----------------------------------------------------------------------
# classification metrics
# ----------------------------------------------------------------------

def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels must have equal length")
    if predictions.size < 1:
        raise ValueError("cannot compute accuracy of an empty prediction set")
    return float(np.mean(predictions == labels))


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # row = true author, column = predicted author
    authors: list[str]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.authors)
        if self.counts.shape != (k, k):
            raise ValueError("confusion matrix must be K x K for K authors")
        if np.any(self.counts < 0):
            raise ValueError("confusion matrix entries must be non-negative")

    @classmethod
    def from_predictions(cls, true_ids, predicted_ids, authors: list[str]) -> "ConfusionMatrix":
        true_ids = np.asarray(true_ids, dtype=np.int64)
        predicted_ids = np.asarray(predicted_ids, dtype=np.int64)
        if true_ids.shape != predicted_ids.shape:
            raise ValueError("true and predicted id arrays must have equal length")
        k = len(authors)
        counts = np.zeros((k, k), dtype=np.int64)
        np.add.at(counts, (true_ids, predicted_ids), 1)
        return cls(counts=counts, authors=list(authors))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class MetricsReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class_accuracy: list[float]
    class_accuracy_variance: float

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class_accuracy": self.per_class_accuracy,
            "class_accuracy_variance": self.class_accuracy_variance,
        }


def macro_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Unweighted class means; per-class accuracy is recall and its spread
    is the population variance."""
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    diag = np.diag(counts)
    col_sums = counts.sum(axis=0)
    row_sums = counts.sum(axis=1)
    precision = np.divide(diag, col_sums, out=np.zeros_like(diag), where=col_sums > 0)
    recall = np.divide(diag, row_sums, out=np.zeros_like(diag), where=row_sums > 0)
    pr_sum = precision + recall
    f1 = np.divide(2 * precision * recall, pr_sum, out=np.zeros_like(diag), where=pr_sum > 0)
    return MetricsReport(
        accuracy=float(diag.sum() / total),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        per_class_accuracy=[float(r) for r in recall],
        class_accuracy_variance=float(np.var(recall)),
    )


def relative_confusion(cm_contrast: ConfusionMatrix, cm_baseline: ConfusionMatrix) -> np.ndarray:
    """Entrywise difference of two confusion matrices on the same test set.

    Every row of the result sums to zero; entry (i, j) < 0 means the
    contrast model confused author i for author j less often.
    """
    if cm_contrast.authors != cm_baseline.authors:
        raise ValueError("confusion matrices cover different author sets")
    if cm_contrast.counts.shape != cm_baseline.counts.shape:
        raise ValueError("confusion matrices have mismatched shapes")
    if not np.array_equal(cm_contrast.counts.sum(axis=1), cm_baseline.counts.sum(axis=1)):
        raise ValueError("confusion matrices have different per-author test counts")
    return cm_contrast.counts - cm_baseline.counts


# ----------------------------------------------------------------------
# distribution and feature distances
# ----------------------------------------------------------------------

def jsd(p, q) -> float:
    """Jensen-Shannon divergence (natural log), in [0, ln 2]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("inputs must be 1-D vectors of equal length")
    for name, vec in (("p", p), ("q", q)):
        if np.any(vec < 0):
            raise ValueError(f"{name} has negative entries")
        if abs(vec.sum() - 1.0) > 1e-6:
            raise ValueError(f"{name} does not sum to 1 (got {vec.sum()!r})")
    m = 0.5 * (p + q)

    def kl(a, b):
        mask = a > 0
        return float(np.sum(a[mask] * np.log(a[mask] / b[mask])))

    return max(0.0, 0.5 * kl(p, m) + 0.5 * kl(q, m))


def _cosine(u: np.ndarray, v: np.ndarray, eps: float = 1e-12) -> float:
    nu = max(float(np.linalg.norm(u)), eps)
    nv = max(float(np.linalg.norm(v)), eps)
    return float(u @ v / (nu * nv))


def _unwrap(feature: AuthorFeature | FeatureVector) -> FeatureVector:
    return feature.vector if isinstance(feature, AuthorFeature) else feature


def feature_distance(u: AuthorFeature | FeatureVector, v: AuthorFeature | FeatureVector) -> float:
    """JSD for topic features, 1 - cosine for everything else."""
    fu, fv = _unwrap(u), _unwrap(v)
    if fu.feature_type != fv.feature_type:
        raise ValueError(f"feature type mismatch: {fu.feature_type} vs {fv.feature_type}")
    if fu.dimension != fv.dimension:
        raise ValueError("feature dimension mismatch")
    if fu.feature_type == "topic":
        return jsd(fu.values, fv.values)
    return 1.0 - _cosine(fu.values, fv.values)


# ----------------------------------------------------------------------
# author profiles and distance reports
# ----------------------------------------------------------------------

@dataclass
class ProfileConfig:
    word_orders: tuple[int, ...] = (1, 2, 3)
    char_orders: tuple[int, ...] = (2, 3)
    k_per_order: int = 1000
    lda_topics: int = 20
    lda_iterations: int = 500
    lda_infer_iterations: int = 100
    seed: int = 0


def build_author_profiles(
    corpus: Corpus, config: ProfileConfig | None = None
) -> dict[str, list[AuthorFeature]]:
    """Per-feature mean document vectors for every author.

    Each document is extracted once per feature; the per-author vectors are
    identical to calling `author_representation` author by author.
    """
    config = config or ProfileConfig()
    word_vocab = build_ngram_vocab(corpus, "word", config.word_orders, config.k_per_order)
    char_vocab = build_ngram_vocab(corpus, "char", config.char_orders, config.k_per_order)
    lda_model = fit_lda(
        corpus,
        num_topics=config.lda_topics,
        iterations=config.lda_iterations,
        seed=config.seed,
    )

    extractors = {
        "content": lambda doc: content_features(doc, word_vocab),
        "style": style_features,
        "hybrid": lambda doc: hybrid_features(doc, char_vocab),
        "topic": lambda doc: topic_features(doc, lda_model, config.lda_infer_iterations),
    }
    profiles: dict[str, list[AuthorFeature]] = {}
    for feature_type, extractor in extractors.items():
        per_author: dict[str, list[np.ndarray]] = {a: [] for a in corpus.authors}
        for doc in corpus.documents:
            per_author[doc.author].append(extractor(doc).values)
        features = []
        for author in corpus.authors:
            if not per_author[author]:
                raise ValueError(f"author {author!r} has no documents")
            mean = np.mean(per_author[author], axis=0)
            features.append(AuthorFeature(author, feature_type, FeatureVector(feature_type, mean)))
        profiles[feature_type] = features
    return profiles


def pairwise_feature_distances(author_features: list[AuthorFeature]) -> np.ndarray:
    """Symmetric matrix of feature distances between all author pairs."""
    k = len(author_features)
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            d = feature_distance(author_features[i], author_features[j])
            out[i, j] = d
            out[j, i] = d
    return out


def dataset_dissimilarity(
    author_features: list[AuthorFeature], include_diagonal: bool = True
) -> float:
    """Mean feature distance over all ordered author pairs.

    The literal reading averages over all |A|^2 ordered pairs including the
    zero-distance diagonal; include_diagonal=False averages over the
    |A|(|A|-1) off-diagonal pairs instead (same ordering of datasets, larger
    values).
    """
    k = len(author_features)
    if k < 2:
        raise ValueError("dataset dissimilarity needs at least 2 authors")
    matrix = pairwise_feature_distances(author_features)
    total = float(matrix.sum())  # diagonal contributes zeros
    denom = k * k if include_diagonal else k * (k - 1)
    return total / denom


def pd_matrix(profiles: dict[str, list[AuthorFeature]]) -> tuple[list[str], np.ndarray]:
    """Pairwise author distance: mean of per-feature distances, each
    normalized by its corpus-wide maximum.

    A feature whose distances are all zero has no distinguishing power and
    contributes zero. Entries lie in [0, 1] with a zero diagonal.
    """
    feature_types = list(profiles)
    authors = [f.author for f in profiles[feature_types[0]]]
    for feature_type in feature_types:
        if [f.author for f in profiles[feature_type]] != authors:
            raise ValueError("profiles disagree on the author list")
    k = len(authors)
    acc = np.zeros((k, k))
    for feature_type in feature_types:
        matrix = pairwise_feature_distances(profiles[feature_type])
        c_f = float(matrix.max())
        if c_f > 0:
            acc += matrix / c_f
    return authors, acc / len(feature_types)


def pairwise_author_distance(
    profiles: dict[str, list[AuthorFeature]], author_a: str, author_b: str
) -> float:
    """Normalized distance between two authors across all feature spaces."""
    authors, matrix = pd_matrix(profiles)
    try:
        i, j = authors.index(author_a), authors.index(author_b)
    except ValueError as exc:
        raise ValueError(f"unknown author in pair ({author_a!r}, {author_b!r})") from exc
    return float(matrix[i, j])


@dataclass
class DistanceReport:
    authors: list[str]
    raw_dissimilarity: dict[str, float]
    scaled_dissimilarity: dict[str, float]
    pd: np.ndarray
    feature_matrices: dict[str, np.ndarray]

    def most_similar_pairs(self, m: int = 4) -> list[tuple[str, str, float]]:
        """The m author pairs with the smallest normalized distance."""
        pairs = []
        for i in range(len(self.authors)):
            for j in range(i + 1, len(self.authors)):
                pairs.append((self.authors[i], self.authors[j], float(self.pd[i, j])))
        pairs.sort(key=lambda t: (t[2], t[0], t[1]))
        return pairs[:m]


def analyze_corpus(corpus: Corpus, config: ProfileConfig | None = None) -> DistanceReport:
    """Full stylometric distance report for one corpus.

    Scaled dissimilarities equal the raw ones divided by the per-feature
    maximum across the compared corpora; for a single corpus they are 1.
    """
    profiles = build_author_profiles(corpus, config)
    raw = {ft: dataset_dissimilarity(profiles[ft]) for ft in FEATURE_TYPES}
    scaled = {ft: 1.0 if raw[ft] > 0 else 0.0 for ft in FEATURE_TYPES}
    authors, pd = pd_matrix(profiles)
    matrices = {ft: pairwise_feature_distances(profiles[ft]) for ft in FEATURE_TYPES}
    return DistanceReport(
        authors=authors,
        raw_dissimilarity=raw,
        scaled_dissimilarity=scaled,
        pd=pd,
        feature_matrices=matrices,
    )


def scale_dissimilarity_columns(rows: dict[str, dict[str, float]]) -> dict[str, dict[str, float]]:
    """Scale each feature column of a corpus x feature table so its maximum
    is 1; all-zero columns stay zero. Column argmin order is preserved."""
    if not rows:
        return {}
    features = sorted({ft for row in rows.values() for ft in row})
    maxima = {ft: max(row.get(ft, 0.0) for row in rows.values()) for ft in features}
    return {
        name: {ft: (row[ft] / maxima[ft] if maxima[ft] > 0 else 0.0) for ft in row}
        for name, row in rows.items()
    }


# ----------------------------------------------------------------------
# embedding geometry
# ----------------------------------------------------------------------

def _power_iteration(matrix: np.ndarray, rng: np.random.Generator,
                     tol: float = 1e-9, max_iter: int = 1000,
                     orthogonal_to: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    d = matrix.shape[0]
    v = rng.standard_normal(d)
    if orthogonal_to is not None:
        v -= (v @ orthogonal_to) * orthogonal_to
    norm = np.linalg.norm(v)
    if norm == 0:
        v = np.zeros(d)
        v[0] = 1.0
    else:
        v /= norm
    for _ in range(max_iter):
        w = matrix @ v
        if orthogonal_to is not None:
            w -= (w @ orthogonal_to) * orthogonal_to
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            # operator is (numerically) zero on the remaining subspace
            fallback = np.zeros(d)
            fallback[int(np.argmin(np.abs(orthogonal_to))) if orthogonal_to is not None else 0] = 1.0
            if orthogonal_to is not None:
                fallback -= (fallback @ orthogonal_to) * orthogonal_to
                fallback /= np.linalg.norm(fallback)
            return fallback, 0.0
        w /= norm
        if np.linalg.norm(w - v) < tol or np.linalg.norm(w + v) < tol:
            v = w
            break
        v = w
    eigenvalue = float(v @ matrix @ v)
    return v, eigenvalue


def project_embeddings(embeddings: np.ndarray, seed: int = 0,
                       tol: float = 1e-9, max_iter: int = 1000) -> np.ndarray:
    """Mean-centered PCA projection onto the top two principal directions.

    Uses seeded power iteration with deflation; zero-variance input yields
    all-zero coordinates and a warning. Output is deterministic up to the
    usual per-axis sign ambiguity.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] < 2:
        raise ValueError("need at least 2 embedding rows to project")
    centered = embeddings - embeddings.mean(axis=0)
    cov = centered.T @ centered / embeddings.shape[0]
    if not np.any(np.abs(cov) > 0):
        warnings.warn("zero-variance embeddings: projection is identically zero")
        return np.zeros((embeddings.shape[0], 2))
    rng = np.random.default_rng(seed)
    v1, lam1 = _power_iteration(cov, rng, tol=tol, max_iter=max_iter)
    deflated = cov - lam1 * np.outer(v1, v1)
    v2, _ = _power_iteration(deflated, rng, tol=tol, max_iter=max_iter, orthogonal_to=v1)
    return centered @ np.stack([v1, v2], axis=1)


def cluster_quality(embeddings: np.ndarray, labels) -> tuple[float, float]:
    """Mean cosine over same-author pairs and over cross-author pairs.

    Self-pairs are excluded. Raises when no same-author pair or no
    cross-author pair exists.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    n = embeddings.shape[0]
    if labels.shape != (n,):
        raise ValueError("labels length does not match embeddings")
    norms = np.maximum(np.linalg.norm(embeddings, axis=1), 1e-12)
    normalized = embeddings / norms[:, None]
    cosines = normalized @ normalized.T
    same = labels[:, None] == labels[None, :]
    off_diag = ~np.eye(n, dtype=bool)
    intra_mask = same & off_diag
    inter_mask = ~same
    if not intra_mask.any():
        raise ValueError("no same-author pair exists")
    if not inter_mask.any():
        raise ValueError("no cross-author pair exists")
    return float(cosines[intra_mask].mean()), float(cosines[inter_mask].mean())
