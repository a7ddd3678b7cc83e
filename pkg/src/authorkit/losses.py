"""Training objectives and their analytic gradients.

The joint objective is a batch-summed cross-entropy plus a weighted
supervised contrastive term computed on the cosine similarity matrix of the
batch embeddings. Log-sum-exp terms are max-subtracted and norms are
epsilon-guarded, so every function here is total on finite inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LossConfig:
    tau: float = 0.1
    lam: float = 1.0
    norm_epsilon: float = 1e-12
    # Literal reading of the contrastive sums keeps the self-pair in both
    # numerator and denominator; the exclude mode drops it from both and
    # skips anchors left without positives.
    include_self: bool = True

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.lam < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")


def similarity_matrix(embeddings: np.ndarray, norm_epsilon: float = 1e-12) -> np.ndarray:
    """Pairwise cosine similarity matrix of the embedding rows."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] < 1:
        raise ValueError("embeddings must be a non-empty 2-D array")
    norms = np.maximum(np.linalg.norm(embeddings, axis=1), norm_epsilon)
    normalized = embeddings / norms[:, None]
    return normalized @ normalized.T


def similarity_matrix_backward(
    embeddings: np.ndarray,
    similarities: np.ndarray,
    grad_similarities: np.ndarray,
    norm_epsilon: float = 1e-12,
) -> np.ndarray:
    """Backpropagate a gradient on the similarity matrix to the embeddings.

    Both occurrences of each embedding in the matrix receive gradient; rows
    whose norm sits at the epsilon guard are treated as having a constant
    norm, matching the forward computation.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    raw_norms = np.linalg.norm(embeddings, axis=1)
    norms = np.maximum(raw_norms, norm_epsilon)
    normalized = embeddings / norms[:, None]
    active = (raw_norms > norm_epsilon).astype(np.float64)

    sym = grad_similarities + grad_similarities.T
    term_direct = sym @ normalized
    term_norm = (sym * similarities).sum(axis=1, keepdims=True) * normalized * active[:, None]
    return (term_direct - term_norm) / norms[:, None]


def contrastive_loss(
    similarities: np.ndarray,
    labels: np.ndarray,
    tau: float,
    include_self: bool = True,
) -> tuple[float, np.ndarray]:
    """Supervised contrastive loss on a similarity matrix, batch sum.

    Per anchor i the loss is -log of the softmax mass (at temperature tau)
    that same-author entries take in row i. Returns (loss, dL/dS).
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    similarities = np.asarray(similarities, dtype=np.float64)
    labels = np.asarray(labels)
    n = similarities.shape[0]
    if similarities.shape != (n, n):
        raise ValueError("similarity matrix must be square")
    if labels.shape != (n,):
        raise ValueError(f"labels length {labels.shape} does not match batch size {n}")

    scaled = similarities / tau
    positive = labels[:, None] == labels[None, :]
    allowed = np.ones((n, n), dtype=bool)
    if not include_self:
        np.fill_diagonal(allowed, False)
        positive = positive & allowed

    neg_inf = -np.inf
    row_max = np.where(allowed, scaled, neg_inf).max(axis=1)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    shifted = np.exp(np.where(allowed, scaled - row_max[:, None], neg_inf))

    sum_all = shifted.sum(axis=1)
    sum_pos = (shifted * positive).sum(axis=1)

    has_positive = sum_pos > 0
    loss_rows = np.zeros(n)
    loss_rows[has_positive] = np.log(sum_all[has_positive]) - np.log(sum_pos[has_positive])
    loss = float(loss_rows.sum())

    grad = np.zeros_like(similarities)
    if has_positive.any():
        safe_all = np.where(sum_all > 0, sum_all, 1.0)
        safe_pos = np.where(has_positive, sum_pos, 1.0)
        softmax_all = shifted / safe_all[:, None]
        softmax_pos = np.where(positive, shifted, 0.0) / safe_pos[:, None]
        grad = (softmax_all - softmax_pos) * has_positive[:, None] / tau
    return loss, grad


def cross_entropy_loss(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Batch-summed cross-entropy with a stable log-softmax.

    Returns (loss, dL/dlogits) where the gradient row is softmax minus the
    one-hot target.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError("labels length does not match logits rows")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise ValueError(f"labels must lie in [0, {k})")

    row_max = logits.max(axis=1)
    shifted = logits - row_max[:, None]
    exp = np.exp(shifted)
    denom = exp.sum(axis=1)
    log_probs = shifted - np.log(denom)[:, None]
    loss = float(-log_probs[np.arange(n), labels].sum())

    grad = exp / denom[:, None]
    grad[np.arange(n), labels] -= 1.0
    return loss, grad


@dataclass
class JointLossResult:
    total: float
    cross_entropy: float
    contrastive: float
    grad_logits: np.ndarray
    grad_embeddings: np.ndarray


def joint_loss(
    logits: np.ndarray,
    embeddings: np.ndarray,
    labels: np.ndarray,
    config: LossConfig,
) -> JointLossResult:
    """Cross-entropy plus lambda times the contrastive term.

    grad_embeddings carries only the contrastive path (the cross-entropy
    path reaches the embeddings through the classifier backward); with
    lambda = 0 the total equals the cross-entropy loss bit-exactly and the
    embedding gradient is zero.
    """
    ce, grad_logits = cross_entropy_loss(logits, labels)
    similarities = similarity_matrix(embeddings, config.norm_epsilon)
    cl, grad_sim = contrastive_loss(similarities, labels, config.tau, config.include_self)
    total = ce + config.lam * cl
    if config.lam == 0.0:
        grad_embeddings = np.zeros_like(np.asarray(embeddings, dtype=np.float64))
    else:
        grad_embeddings = config.lam * similarity_matrix_backward(
            embeddings, similarities, grad_sim, config.norm_epsilon
        )
    return JointLossResult(
        total=total,
        cross_entropy=ce,
        contrastive=cl,
        grad_logits=grad_logits,
        grad_embeddings=grad_embeddings,
    )
