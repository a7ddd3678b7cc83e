"""Mini-batch training loop: AdamW, cosine learning-rate schedule, history.

A run is fully determined by (model, corpus splits, config): shuffling and
dropout seeds are drawn from a single generator seeded by the config, and
the best-validation checkpoint is retained alongside the final parameters.
"""

from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import Corpus, Document
from .encoder import AttributionModel, tokenize_batch
from .losses import LossConfig, cross_entropy_loss, joint_loss


@dataclass
class TrainConfig:
    epochs: int = 8
    batch_size: int = 24
    lr0: float = 1e-3  # from-scratch encoder scale; 2e-5 suits pre-trained weights
    lr_min: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    weight_decay: float = 0.01
    loss: LossConfig = field(default_factory=LossConfig)
    seed: int = 0
    sampler: str = "shuffle"  # shuffle | class_balanced
    balanced_authors: int = 8  # authors per batch for the class_balanced sampler
    balanced_docs: int = 3  # documents per author for the class_balanced sampler

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if self.lr_min < 0:
            raise ValueError("lr_min must be non-negative")
        if self.sampler not in ("shuffle", "class_balanced"):
            raise ValueError(f"unknown sampler {self.sampler!r}")

    def to_dict(self) -> dict:
        out = asdict(self)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        loss = obj.pop("loss", {})
        return cls(loss=LossConfig(**loss), **obj)


def cosine_lr(step: int, total_steps: int, lr0: float, lr_min: float = 0.0) -> float:
    """Half-cosine decay from lr0 (step 0) to lr_min (step = total_steps)."""
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} out of range [0, {total_steps}]")
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))


@dataclass
class AdamWState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamWState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamWState,
    lr: float,
    config: TrainConfig,
) -> None:
    """One bias-corrected AdamW update, in place.

    Weight decay is decoupled: after the moment-based step each parameter is
    shrunk by lr * weight_decay separately from the gradient direction.
    """
    state.step += 1
    t = state.step
    for name in sorted(params):
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in tensor {name!r} at optimizer step {t}")
        state.m[name] = config.beta1 * state.m[name] + (1.0 - config.beta1) * g
        state.v[name] = config.beta2 * state.v[name] + (1.0 - config.beta2) * g * g
        m_hat = state.m[name] / (1.0 - config.beta1**t)
        v_hat = state.v[name] / (1.0 - config.beta2**t)
        params[name] -= lr * m_hat / (np.sqrt(v_hat) + config.adam_epsilon)
        params[name] -= lr * config.weight_decay * params[name]


@dataclass
class StepRecord:
    step: int
    lr: float
    l_ce: float  # per-sample mean, for logging; optimization uses batch sums
    l_cl: float
    l_total: float


@dataclass
class TrainHistory:
    steps: list[StepRecord] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("step,lr,l_ce,l_cl,l_total\n")
        for rec in self.steps:
            buf.write(f"{rec.step},{rec.lr!r},{rec.l_ce!r},{rec.l_cl!r},{rec.l_total!r}\n")
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "num_steps": len(self.steps),
            "val_accuracy": self.val_accuracy,
            "best_epoch": self.best_epoch,
            "final_l_ce": self.steps[-1].l_ce if self.steps else None,
            "final_l_cl": self.steps[-1].l_cl if self.steps else None,
            "final_l_total": self.steps[-1].l_total if self.steps else None,
        }


@dataclass
class TrainResult:
    model: AttributionModel  # carries the best-validation parameters
    history: TrainHistory
    final_params: dict[str, np.ndarray]
    best_params: dict[str, np.ndarray]
    best_val_accuracy: float | None


def _batches_for_epoch(rng: np.random.Generator, labels: np.ndarray,
                       config: TrainConfig) -> list[np.ndarray]:
    n = labels.shape[0]
    steps = math.ceil(n / config.batch_size)
    if config.sampler == "shuffle":
        perm = rng.permutation(n)
        return [perm[i * config.batch_size : (i + 1) * config.batch_size] for i in range(steps)]
    # class_balanced: P authors x Q documents per batch
    by_label: dict[int, np.ndarray] = {
        int(a): np.flatnonzero(labels == a) for a in np.unique(labels)
    }
    label_ids = sorted(by_label)
    p = min(config.balanced_authors, len(label_ids))
    batches = []
    for _ in range(steps):
        chosen = rng.choice(len(label_ids), size=p, replace=False)
        rows = []
        for c in chosen:
            pool = by_label[label_ids[int(c)]]
            q = config.balanced_docs
            rows.append(rng.choice(pool, size=q, replace=len(pool) < q))
        batches.append(np.concatenate(rows))
    return batches


def train(
    model: AttributionModel,
    train_corpus: Corpus,
    val_corpus: Corpus | None,
    config: TrainConfig,
    ce_only: bool = False,
) -> TrainResult:
    """Train the joint objective (or plain cross-entropy when ce_only).

    With lam = 0 the parameter trajectory is bit-identical to the ce_only
    path under the same seed; the contrastive value is still computed for
    the history in that case but contributes no gradient.
    """
    if not train_corpus.documents:
        raise ValueError("training split is empty")
    ids, n_real = tokenize_batch([d.text for d in train_corpus.documents], model.vocab)
    labels = train_corpus.label_ids()

    n = len(train_corpus.documents)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    rng = np.random.default_rng(config.seed)

    history = TrainHistory()
    state = AdamWState.for_params(model.params)
    best_params: dict[str, np.ndarray] | None = None
    best_val: float | None = None
    step = 0

    for epoch in range(config.epochs):
        for batch in _batches_for_epoch(rng, labels, config):
            lr = cosine_lr(step, total_steps, config.lr0, config.lr_min)
            dropout_seed = int(rng.integers(0, 2**63))
            fwd = model.forward(ids[batch], n_real[batch], train_mode=True, dropout_seed=dropout_seed)
            batch_labels = labels[batch]
            if ce_only:
                ce, grad_logits = cross_entropy_loss(fwd.logits, batch_labels)
                cl = 0.0
                total = ce
                grad_embeddings = None
            else:
                res = joint_loss(fwd.logits, fwd.embeddings, batch_labels, config.loss)
                ce, cl, total = res.cross_entropy, res.contrastive, res.total
                grad_logits = res.grad_logits
                # skip the zero contrastive gradient entirely so a lam=0 run
                # follows the ce_only code path bit for bit
                grad_embeddings = None if config.loss.lam == 0.0 else res.grad_embeddings
            if not math.isfinite(total):
                raise FloatingPointError(
                    f"non-finite loss at step {step} (epoch {epoch}): ce={ce!r}, cl={cl!r}"
                )
            grads = model.backward(fwd.cache, grad_logits, grad_embeddings)
            adamw_step(model.params, grads, state, lr, config)
            b = len(batch)
            history.steps.append(StepRecord(step=step, lr=lr, l_ce=ce / b, l_cl=cl / b, l_total=total / b))
            step += 1
        if val_corpus is not None and val_corpus.documents:
            preds, _ = evaluate(model, val_corpus)
            acc = float(np.mean(preds == val_corpus.label_ids()))
            history.val_accuracy.append(acc)
            # ties keep the latest epoch, so a saturated run retains the
            # fully trained parameters
            if best_val is None or acc >= best_val:
                best_val = acc
                best_params = {k: p.copy() for k, p in model.params.items()}
                history.best_epoch = epoch

    final_params = {k: p.copy() for k, p in model.params.items()}
    if best_params is None:
        best_params = final_params
        best_val = None
    model.params = {k: p.copy() for k, p in best_params.items()}
    return TrainResult(
        model=model,
        history=history,
        final_params=final_params,
        best_params=best_params,
        best_val_accuracy=best_val,
    )


def evaluate(
    model: AttributionModel,
    documents: Corpus | list[Document],
    batch_size: int = 256,
) -> tuple[np.ndarray, np.ndarray]:
    """Predicted author ids and embeddings, dropout disabled.

    Ties in the logits resolve to the lowest author id. A Corpus argument
    must carry the exact author list the model was trained with.
    """
    if isinstance(documents, Corpus):
        if documents.authors != model.authors:
            raise ValueError("corpus author set does not match the model's training authors")
        docs = documents.documents
    else:
        docs = list(documents)
    if not docs:
        raise ValueError("nothing to evaluate")
    preds = np.empty(len(docs), dtype=np.int64)
    embeddings = np.empty((len(docs), model.config.d_e))
    for start in range(0, len(docs), batch_size):
        chunk = docs[start : start + batch_size]
        ids, n_real = tokenize_batch([d.text for d in chunk], model.vocab)
        fwd = model.forward(ids, n_real, train_mode=False)
        preds[start : start + len(chunk)] = np.argmax(fwd.logits, axis=1)
        embeddings[start : start + len(chunk)] = fwd.embeddings
    return preds, embeddings
