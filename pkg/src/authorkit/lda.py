"""Topic features via latent Dirichlet allocation, collapsed Gibbs sampling.

The sampler runs full sweeps over every token assignment; per-document
topic distributions are inferred afterwards with the topic-word matrix held
fixed. Both passes are deterministic given their seeds.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .corpus import Corpus, Document
from .stylometry import FeatureVector, word_tokens


@dataclass
class LdaModel:
    num_topics: int
    topic_word: np.ndarray  # num_topics x V, row-stochastic
    alpha: float
    beta: float
    iterations: int
    seed: int
    vocabulary: list[str]

    def __post_init__(self):
        self.topic_word = np.asarray(self.topic_word, dtype=np.float64)
        if self.topic_word.shape != (self.num_topics, len(self.vocabulary)):
            raise ValueError("topic_word shape does not match num_topics x vocabulary size")
        if np.any(self.topic_word < 0):
            raise ValueError("topic_word entries must be non-negative")
        if np.any(np.abs(self.topic_word.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("topic_word rows must sum to 1")
        self.word_index = {w: i for i, w in enumerate(self.vocabulary)}

    def save(self, path: str | Path) -> None:
        obj = {
            "num_topics": self.num_topics,
            "vocab_size": len(self.vocabulary),
            "alpha": self.alpha,
            "beta": self.beta,
            "iterations": self.iterations,
            "seed": self.seed,
            "vocabulary": self.vocabulary,
            "topic_word": self.topic_word.ravel().tolist(),
        }
        Path(path).write_text(json.dumps(obj, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "LdaModel":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        topic_word = np.array(obj["topic_word"], dtype=np.float64).reshape(
            obj["num_topics"], obj["vocab_size"]
        )
        return cls(
            num_topics=obj["num_topics"],
            topic_word=topic_word,
            alpha=obj["alpha"],
            beta=obj["beta"],
            iterations=obj["iterations"],
            seed=obj["seed"],
            vocabulary=list(obj["vocabulary"]),
        )


@njit(cache=True)
def _gibbs_sweeps(token_ids, doc_ids, z, n_dk, n_kw, n_k, alpha, beta, iterations, seed):
    np.random.seed(seed)
    num_topics = n_kw.shape[0]
    vbeta = n_kw.shape[1] * beta
    probs = np.empty(num_topics)
    for _ in range(iterations):
        for i in range(token_ids.shape[0]):
            w = token_ids[i]
            d = doc_ids[i]
            k = z[i]
            n_dk[d, k] -= 1
            n_kw[k, w] -= 1
            n_k[k] -= 1
            total = 0.0
            for t in range(num_topics):
                probs[t] = (n_kw[t, w] + beta) / (n_k[t] + vbeta) * (n_dk[d, t] + alpha)
                total += probs[t]
            r = np.random.random() * total
            acc = 0.0
            new_k = num_topics - 1
            for t in range(num_topics):
                acc += probs[t]
                if r < acc:
                    new_k = t
                    break
            z[i] = new_k
            n_dk[d, new_k] += 1
            n_kw[new_k, w] += 1
            n_k[new_k] += 1


@njit(cache=True)
def _gibbs_infer(token_ids, z, topic_word, alpha, iterations, seed):
    np.random.seed(seed)
    num_topics = topic_word.shape[0]
    counts = np.zeros(num_topics, dtype=np.int64)
    for i in range(token_ids.shape[0]):
        counts[z[i]] += 1
    probs = np.empty(num_topics)
    for _ in range(iterations):
        for i in range(token_ids.shape[0]):
            w = token_ids[i]
            counts[z[i]] -= 1
            total = 0.0
            for t in range(num_topics):
                probs[t] = topic_word[t, w] * (counts[t] + alpha)
                total += probs[t]
            r = np.random.random() * total
            acc = 0.0
            new_k = num_topics - 1
            for t in range(num_topics):
                acc += probs[t]
                if r < acc:
                    new_k = t
                    break
            z[i] = new_k
            counts[new_k] += 1
    return counts


def _derived_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def fit_lda(
    corpus: Corpus,
    num_topics: int = 20,
    iterations: int = 500,
    alpha: float | None = None,
    beta: float = 0.01,
    seed: int = 0,
) -> LdaModel:
    """Fit an LDA model by collapsed Gibbs sampling over the corpus.

    alpha defaults to 50 / num_topics and beta to 0.01. The topic-word
    matrix is the smoothed empirical distribution of the final token-topic
    assignment counts.
    """
    if not corpus.documents:
        raise ValueError("empty corpus")
    if num_topics < 1:
        raise ValueError("num_topics must be >= 1")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if alpha is None:
        alpha = 50.0 / num_topics
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")

    tokenized = [word_tokens(doc.text) for doc in corpus.documents]
    vocabulary = sorted({w for tokens in tokenized for w in tokens})
    if not vocabulary:
        raise ValueError("empty vocabulary after tokenization")
    word_index = {w: i for i, w in enumerate(vocabulary)}

    token_ids = []
    doc_ids = []
    for d, tokens in enumerate(tokenized):
        for w in tokens:
            token_ids.append(word_index[w])
            doc_ids.append(d)
    token_ids = np.array(token_ids, dtype=np.int64)
    doc_ids = np.array(doc_ids, dtype=np.int64)
    total_tokens = token_ids.shape[0]

    rng = np.random.default_rng(_derived_seed("lda-init", seed))
    z = rng.integers(0, num_topics, size=total_tokens, dtype=np.int64)

    n_dk = np.zeros((len(corpus.documents), num_topics), dtype=np.int64)
    n_kw = np.zeros((num_topics, len(vocabulary)), dtype=np.int64)
    n_k = np.zeros(num_topics, dtype=np.int64)
    np.add.at(n_dk, (doc_ids, z), 1)
    np.add.at(n_kw, (z, token_ids), 1)
    np.add.at(n_k, z, 1)

    _gibbs_sweeps(
        token_ids, doc_ids, z, n_dk, n_kw, n_k,
        float(alpha), float(beta), int(iterations),
        _derived_seed("lda-sweep", seed) % (2**32),
    )

    if n_kw.sum() != total_tokens or n_dk.sum() != total_tokens:
        raise RuntimeError("topic count bookkeeping lost tokens during sampling")

    topic_word = (n_kw + beta) / (n_k[:, None] + len(vocabulary) * beta)
    return LdaModel(
        num_topics=num_topics,
        topic_word=topic_word,
        alpha=float(alpha),
        beta=float(beta),
        iterations=int(iterations),
        seed=int(seed),
        vocabulary=vocabulary,
    )


def topic_features(doc: Document, model: LdaModel, infer_iterations: int = 100) -> FeatureVector:
    """Per-document topic distribution with the topic-word matrix held fixed.

    Documents with no in-vocabulary tokens get the uniform distribution and
    a "no-vocabulary-overlap" flag. Deterministic for a given (document,
    model) pair.
    """
    ids = [model.word_index[w] for w in word_tokens(doc.text) if w in model.word_index]
    k = model.num_topics
    if not ids:
        return FeatureVector("topic", np.full(k, 1.0 / k), flag="no-vocabulary-overlap")
    token_ids = np.array(ids, dtype=np.int64)
    rng = np.random.default_rng(_derived_seed("lda-infer-init", model.seed, doc.id))
    z = rng.integers(0, k, size=token_ids.shape[0], dtype=np.int64)
    counts = _gibbs_infer(
        token_ids, z, model.topic_word, model.alpha, int(infer_iterations),
        _derived_seed("lda-infer", model.seed, doc.id) % (2**32),
    )
    dist = (counts + model.alpha) / (token_ids.shape[0] + k * model.alpha)
    return FeatureVector("topic", dist)
