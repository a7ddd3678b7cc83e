import numpy as np
import pytest

from authorkit.corpus import Corpus, Document, generate_synthetic_corpus, stratified_split
from authorkit.encoder import (
    PAD_TOKEN,
    UNK_TOKEN,
    AttributionModel,
    ModelConfig,
    TokenVocabulary,
)

# The fixed corpus used by the acceptance suite: 10 authors, 200 docs each,
# 120 tokens per doc, vocab 2000, skew 0.6, seed 7.
GOLDEN_SPEC = dict(num_authors=10, docs_per_author=200, doc_length=120,
                   vocab_size=2000, skew=0.6, seed=7)


@pytest.fixture(scope="session")
def golden_corpus():
    return generate_synthetic_corpus(**GOLDEN_SPEC)


@pytest.fixture(scope="session")
def golden_splits(golden_corpus):
    manifest = stratified_split(golden_corpus, (0.8, 0.1, 0.1), seed=7)
    return {name: golden_corpus.subset(ids) for name, ids in manifest.splits().items()}


@pytest.fixture
def toy_corpus():
    docs = [
        Document("d1", "the cat sat on the mat", "alice"),
        Document("d2", "the dog ate my homework", "bob"),
        Document("d3", "a cat and a dog met", "alice"),
        Document("d4", "my homework sat on the dog", "bob"),
        Document("d5", "numbers like 42 and 7 appear", "carol"),
        Document("d6", "the mat sat on the cat", "carol"),
    ]
    return Corpus.from_documents(docs)


def tiny_model(num_tokens=18, max_len=12, d_tok=6, d_h=7, d_e=8, d_h2=9,
               authors=("x", "y", "z"), dropout=0.35, init_seed=0):
    """Small model for gradient checks and unit tests."""
    tokens = [PAD_TOKEN, UNK_TOKEN] + [f"t{i}" for i in range(num_tokens - 2)]
    vocab = TokenVocabulary(tokens=tokens, max_len=max_len)
    config = ModelConfig(d_tok=d_tok, d_h=d_h, d_e=d_e, d_h2=d_h2,
                         dropout_rate=dropout, vocab_cap=num_tokens, max_len=max_len)
    return AttributionModel.build(vocab, list(authors), config, init_seed=init_seed)


def random_batch(rng, model, n=4):
    """Random token batch (with one short and one near-empty row) and labels."""
    max_len = model.vocab.max_len
    n_real = rng.integers(1, max_len + 1, size=n)
    n_real[min(1, n - 1)] = 1
    ids = np.zeros((n, max_len), dtype=np.int64)
    for i in range(n):
        ids[i, : n_real[i]] = rng.integers(2, model.vocab.size, size=n_real[i])
    labels = rng.integers(0, model.num_authors, size=n)
    return ids, n_real, labels
