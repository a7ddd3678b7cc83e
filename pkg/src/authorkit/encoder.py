"""Trainable attribution model: tokenizer, mean-pool encoder, MLP classifier.

The encoder maps a token-id sequence to an embedding by mean-pooling the
embedding-table rows over non-pad positions and applying a two-layer tanh
projector; the head is a two-layer tanh MLP with inverted dropout on its
hidden layer. All gradients are computed by hand in `backward`. Any
substitute encoder only needs to reproduce the `forward`/`backward` surface
to plug into the trainer.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .stylometry import word_tokens

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"


@dataclass
class TokenVocabulary:
    tokens: list[str]  # position = id; tokens[0] is PAD, tokens[1] is UNK
    max_len: int = 256

    def __post_init__(self):
        if self.tokens[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ValueError("token list must start with the PAD and UNK markers")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("tokens must be unique")
        if self.max_len < 1:
            raise ValueError("max_len must be positive")
        self.token_index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def size(self) -> int:
        return len(self.tokens)

    def sha256(self) -> str:
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()


def build_token_vocab(corpus: Corpus, cap: int, max_len: int = 256) -> TokenVocabulary:
    """Vocabulary of the `cap` most frequent word tokens plus PAD/UNK.

    Build this on the training split only so validation/test-only tokens map
    to UNK. Ties break lexicographically.
    """
    if cap < 1:
        raise ValueError("cap must be positive")
    if not corpus.documents:
        raise ValueError("empty corpus")
    counts: Counter = Counter()
    for doc in corpus.documents:
        counts.update(word_tokens(doc.text))
    top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:cap]
    return TokenVocabulary(tokens=[PAD_TOKEN, UNK_TOKEN] + [t for t, _ in top], max_len=max_len)


def tokenize(text: str, vocab: TokenVocabulary) -> tuple[np.ndarray, int]:
    """Fixed-length id sequence and the count of non-pad positions."""
    words = word_tokens(text)[: vocab.max_len]
    ids = np.full(vocab.max_len, PAD_ID, dtype=np.int64)
    for i, w in enumerate(words):
        ids[i] = vocab.token_index.get(w, UNK_ID)
    return ids, len(words)


def tokenize_batch(texts: list[str], vocab: TokenVocabulary) -> tuple[np.ndarray, np.ndarray]:
    ids = np.full((len(texts), vocab.max_len), PAD_ID, dtype=np.int64)
    n_real = np.zeros(len(texts), dtype=np.int64)
    for row, text in enumerate(texts):
        ids[row], n_real[row] = tokenize(text, vocab)
    return ids, n_real


@dataclass
class ModelConfig:
    d_tok: int = 64
    d_h: int = 128
    d_e: int = 64
    d_h2: int = 128
    dropout_rate: float = 0.35
    vocab_cap: int = 8000
    max_len: int = 256

    def __post_init__(self):
        for name in ("d_tok", "d_h", "d_e", "d_h2", "vocab_cap", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")


@dataclass
class ForwardCache:
    ids: np.ndarray
    n_real: np.ndarray
    pooled: np.ndarray
    enc_hidden: np.ndarray  # tanh activations of the projector hidden layer
    embeddings: np.ndarray
    head_hidden: np.ndarray  # tanh activations of the head hidden layer
    dropout_mask: np.ndarray | None  # scale folded in; None in eval mode
    head_input_dropped: np.ndarray


@dataclass
class ForwardResult:
    embeddings: np.ndarray
    logits: np.ndarray
    cache: ForwardCache | None


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class AttributionModel:
    """Mean-pool encoder + MLP head over a fixed token vocabulary."""

    PARAM_NAMES = (
        "emb",
        "enc_w1", "enc_b1", "enc_w2", "enc_b2",
        "head_w1", "head_b1", "head_w2", "head_b2",
    )

    def __init__(self, vocab: TokenVocabulary, authors: list[str],
                 config: ModelConfig, params: dict[str, np.ndarray], init_seed: int):
        self.vocab = vocab
        self.authors = list(authors)
        self.config = config
        self.params = params
        self.init_seed = init_seed
        self._check_shapes()

    @classmethod
    def build(cls, vocab: TokenVocabulary, authors: list[str],
              config: ModelConfig | None = None, init_seed: int = 0) -> "AttributionModel":
        config = config or ModelConfig()
        rng = np.random.default_rng(init_seed)
        v, dt, dh, de, dh2, k = (vocab.size, config.d_tok, config.d_h,
                                 config.d_e, config.d_h2, len(authors))
        params = {
            "emb": _glorot(rng, v, dt, (v, dt)),
            "enc_w1": _glorot(rng, dt, dh, (dt, dh)),
            "enc_b1": np.zeros(dh),
            "enc_w2": _glorot(rng, dh, de, (dh, de)),
            "enc_b2": np.zeros(de),
            "head_w1": _glorot(rng, de, dh2, (de, dh2)),
            "head_b1": np.zeros(dh2),
            "head_w2": _glorot(rng, dh2, k, (dh2, k)),
            "head_b2": np.zeros(k),
        }
        return cls(vocab, authors, config, params, init_seed)

    def _check_shapes(self):
        c = self.config
        expected = {
            "emb": (self.vocab.size, c.d_tok),
            "enc_w1": (c.d_tok, c.d_h), "enc_b1": (c.d_h,),
            "enc_w2": (c.d_h, c.d_e), "enc_b2": (c.d_e,),
            "head_w1": (c.d_e, c.d_h2), "head_b1": (c.d_h2,),
            "head_w2": (c.d_h2, len(self.authors)), "head_b2": (len(self.authors),),
        }
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ValueError(f"parameter {name!r} has shape {self.params[name].shape}, expected {shape}")

    @property
    def num_authors(self) -> int:
        return len(self.authors)

    def encode(self, ids: np.ndarray, n_real: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Embeddings for a batch of id sequences.

        Returns (embeddings, pooled, enc_hidden); sequences with no real
        tokens pool to the zero vector and still flow through the projector.
        """
        if ids.ndim != 2 or ids.shape[1] != self.vocab.max_len:
            raise ValueError(f"ids must have shape (N, {self.vocab.max_len})")
        p = self.params
        gathered = p["emb"][ids]  # (N, L, d_tok)
        mask = (np.arange(ids.shape[1])[None, :] < n_real[:, None]).astype(np.float64)
        denom = np.maximum(n_real, 1).astype(np.float64)
        pooled = (gathered * mask[:, :, None]).sum(axis=1) / denom[:, None]
        enc_hidden = np.tanh(pooled @ p["enc_w1"] + p["enc_b1"])
        embeddings = enc_hidden @ p["enc_w2"] + p["enc_b2"]
        return embeddings, pooled, enc_hidden

    def classify(self, embeddings: np.ndarray, train_mode: bool = False,
                 dropout_seed: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray | None, np.ndarray]:
        """Logits for a batch of embeddings.

        Dropout (inverted scaling) is applied to the head hidden layer only
        in train mode, with a mask fully determined by dropout_seed.
        """
        p = self.params
        if embeddings.shape[1] != self.config.d_e:
            raise ValueError(f"embedding dimension {embeddings.shape[1]} does not match head input {self.config.d_e}")
        head_hidden = np.tanh(embeddings @ p["head_w1"] + p["head_b1"])
        rate = self.config.dropout_rate
        if train_mode and rate > 0.0:
            rng = np.random.default_rng(dropout_seed)
            keep = (rng.random(head_hidden.shape) >= rate).astype(np.float64)
            dropout_mask = keep / (1.0 - rate)
            dropped = head_hidden * dropout_mask
        else:
            dropout_mask = None
            dropped = head_hidden
        logits = dropped @ p["head_w2"] + p["head_b2"]
        return logits, head_hidden, dropout_mask, dropped

    def forward(self, ids: np.ndarray, n_real: np.ndarray, train_mode: bool = False,
                dropout_seed: int = 0) -> ForwardResult:
        embeddings, pooled, enc_hidden = self.encode(ids, n_real)
        logits, head_hidden, dropout_mask, dropped = self.classify(
            embeddings, train_mode=train_mode, dropout_seed=dropout_seed
        )
        cache = None
        if train_mode:
            cache = ForwardCache(
                ids=ids, n_real=n_real, pooled=pooled, enc_hidden=enc_hidden,
                embeddings=embeddings, head_hidden=head_hidden,
                dropout_mask=dropout_mask, head_input_dropped=dropped,
            )
        return ForwardResult(embeddings=embeddings, logits=logits, cache=cache)

    def backward(self, cache: ForwardCache, grad_logits: np.ndarray,
                 grad_embeddings: np.ndarray | None = None) -> dict[str, np.ndarray]:
        """Exact gradients for every parameter tensor.

        grad_embeddings, when given, is an extra gradient arriving directly
        at the embeddings (the contrastive path) and is added to the
        gradient flowing back through the head.
        """
        if cache is None:
            raise ValueError("backward needs the cache from a train-mode forward pass")
        n = cache.embeddings.shape[0]
        if grad_logits.shape != (n, self.num_authors):
            raise ValueError(
                f"grad_logits shape {grad_logits.shape} does not match cached forward "
                f"batch ({n}, {self.num_authors}): stale cache?"
            )
        p = self.params
        grads: dict[str, np.ndarray] = {}

        grads["head_w2"] = cache.head_input_dropped.T @ grad_logits
        grads["head_b2"] = grad_logits.sum(axis=0)
        d_dropped = grad_logits @ p["head_w2"].T
        d_head_hidden = d_dropped * cache.dropout_mask if cache.dropout_mask is not None else d_dropped
        d_z2 = d_head_hidden * (1.0 - cache.head_hidden**2)
        grads["head_w1"] = cache.embeddings.T @ d_z2
        grads["head_b1"] = d_z2.sum(axis=0)

        d_embeddings = d_z2 @ p["head_w1"].T
        if grad_embeddings is not None:
            d_embeddings = d_embeddings + grad_embeddings

        grads["enc_w2"] = cache.enc_hidden.T @ d_embeddings
        grads["enc_b2"] = d_embeddings.sum(axis=0)
        d_enc_hidden = d_embeddings @ p["enc_w2"].T
        d_z1 = d_enc_hidden * (1.0 - cache.enc_hidden**2)
        grads["enc_w1"] = cache.pooled.T @ d_z1
        grads["enc_b1"] = d_z1.sum(axis=0)

        d_pooled = d_z1 @ p["enc_w1"].T
        length = cache.ids.shape[1]
        mask = (np.arange(length)[None, :] < cache.n_real[:, None]).astype(np.float64)
        weights = mask / np.maximum(cache.n_real, 1)[:, None]  # (N, L)
        contributions = weights[:, :, None] * d_pooled[:, None, :]  # (N, L, d_tok)
        d_emb = np.zeros_like(p["emb"])
        np.add.at(d_emb, cache.ids.ravel(), contributions.reshape(-1, self.config.d_tok))
        grads["emb"] = d_emb
        return grads


def save_checkpoint(model: AttributionModel, base_path: str | Path) -> tuple[Path, Path]:
    """Write <base>.json metadata and <base>.bin little-endian float64 blob."""
    base = Path(base_path)
    meta_path = Path(str(base) + ".json")
    blob_path = Path(str(base) + ".bin")
    tensors = []
    blob = bytearray()
    for name in AttributionModel.PARAM_NAMES:
        arr = np.ascontiguousarray(model.params[name], dtype="<f8")
        tensors.append({"name": name, "shape": list(arr.shape), "offset_bytes": len(blob)})
        blob.extend(arr.tobytes())
    meta = {
        "format": "authorkit-model",
        "version": 1,
        "config": asdict(model.config),
        "init_seed": model.init_seed,
        "authors": model.authors,
        "max_len": model.vocab.max_len,
        "vocab": model.vocab.tokens,
        "vocab_sha256": model.vocab.sha256(),
        "tensors": tensors,
    }
    meta_path.write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")
    blob_path.write_bytes(bytes(blob))
    return meta_path, blob_path


def load_checkpoint(base_path: str | Path) -> AttributionModel:
    """Load a checkpoint pair; evaluation outputs reproduce bit-exactly."""
    meta_path = Path(str(base_path) + ".json")
    blob_path = Path(str(base_path) + ".bin")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("format") != "authorkit-model":
        raise ValueError(f"{meta_path} is not a model checkpoint")
    blob = blob_path.read_bytes()
    vocab = TokenVocabulary(tokens=list(meta["vocab"]), max_len=int(meta["max_len"]))
    if vocab.sha256() != meta["vocab_sha256"]:
        raise ValueError("vocabulary hash mismatch in checkpoint metadata")
    params: dict[str, np.ndarray] = {}
    for spec in meta["tensors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape))
        start = spec["offset_bytes"]
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=start).reshape(shape)
        params[spec["name"]] = arr.astype(np.float64).copy()
    config = ModelConfig(**meta["config"])
    return AttributionModel(vocab, list(meta["authors"]), config, params, int(meta["init_seed"]))
