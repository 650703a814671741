"""Forward pass, loss, analytic gradients, and the Adam training loop.

Architecture, per document: embed tokens (frozen vectors), slide a width-k
convolution over token windows, ReLU, take the global maximum per filter
over the document's valid positions, then an affine layer and element-wise
sigmoid gives one probability per register.

Training is mini-batch gradient descent with the Adam update rule, seeded
initialization and shuffling, and early stopping on dev micro-F1. Reruns
with the same config, data, and kernel backend are bit-identical.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..corpus import Corpus
from ..embeddings import EmbeddingTable, EncodedDoc, encode, pad_batch, tokenize
from ..taxonomy import Taxonomy, default_taxonomy
from .backends import get_backend
from .config import CnnConfig, CnnParams, TrainHistory, init_params

EPS = 1e-7  # probability clamp inside the loss

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDivergedError(RuntimeError):
    """Training hit a non-finite loss; carries context for diagnosis."""


@dataclass
class EncodedDataset:
    """Encoded documents plus their 0/1 target matrix (N x labels)."""

    docs: list[EncodedDoc]
    targets: np.ndarray

    def __post_init__(self):
        if len(self.docs) != self.targets.shape[0]:
            raise ValueError("documents/targets size mismatch")

    def __len__(self) -> int:
        return len(self.docs)


def labels_matrix(
    label_sets: list[frozenset[str]], label_order: tuple[str, ...]
) -> np.ndarray:
    out = np.zeros((len(label_sets), len(label_order)), dtype=np.float64)
    for i, labels in enumerate(label_sets):
        for code in labels:
            out[i, label_order.index(code)] = 1.0
    return out


def build_dataset(
    corpus: Corpus,
    table: EmbeddingTable,
    max_len: int,
    taxonomy: Taxonomy | None = None,
) -> EncodedDataset:
    """Tokenize, encode, and vectorize a main-level-labelled corpus."""
    taxonomy = taxonomy or default_taxonomy()
    docs = [encode(tokenize(d.text), table, max_len) for d in corpus.documents]
    targets = labels_matrix([d.labels for d in corpus.documents], taxonomy.label_order)
    return EncodedDataset(docs=docs, targets=targets)


def _gather(table: EmbeddingTable, indices: np.ndarray) -> np.ndarray:
    return table.matrix[indices].astype(np.float64)


def _forward_emb(params: CnnParams, emb, lengths, kernels):
    pooled, argmax = kernels.conv_pool_forward(emb, lengths, params.conv_w, params.conv_b)
    logits = pooled @ params.out_w.T + params.out_b
    probs = expit(logits)
    return probs, pooled, argmax


def forward(
    params: CnnParams,
    table: EmbeddingTable,
    docs: list[EncodedDoc],
    backend: str | None = None,
) -> np.ndarray:
    """Per-label probabilities for a batch of encoded documents (B x L)."""
    kernels = get_backend(backend)
    indices, lengths = pad_batch(docs, min_len=params.kernel)
    emb = _gather(table, indices)
    probs, _, _ = _forward_emb(params, emb, lengths, kernels)
    return probs


def bce_loss(probs: np.ndarray, targets: np.ndarray, eps: float = EPS) -> float:
    """Mean binary cross-entropy over every (document, label) cell, with
    probabilities clamped to [eps, 1 - eps]."""
    if probs.shape != targets.shape:
        raise ValueError(f"shape mismatch: {probs.shape} vs {targets.shape}")
    q = np.clip(probs, eps, 1.0 - eps)
    return float(np.mean(-(targets * np.log(q) + (1.0 - targets) * np.log1p(-q))))


def _loss_and_dlogits(probs, targets, eps=EPS):
    q = np.clip(probs, eps, 1.0 - eps)
    loss = float(np.mean(-(targets * np.log(q) + (1.0 - targets) * np.log1p(-q))))
    # Through the clamp: zero slope outside [eps, 1-eps], (p - t)/size inside.
    inside = (probs > eps) & (probs < 1.0 - eps)
    dq = (q - targets) / (q * (1.0 - q)) / probs.size
    dlogits = np.where(inside, dq * probs * (1.0 - probs), 0.0)
    return loss, dlogits


def _gradients_emb(params: CnnParams, emb, lengths, targets, kernels):
    probs, pooled, argmax = _forward_emb(params, emb, lengths, kernels)
    loss, dlogits = _loss_and_dlogits(probs, targets)
    grad_out_w = dlogits.T @ pooled
    grad_out_b = dlogits.sum(axis=0)
    dpooled = dlogits @ params.out_w
    # Max pooling routes the gradient to the argmax window; ReLU kills it
    # when the winning pre-activation was <= 0 (pooled value 0).
    dpre = np.where(pooled > 0.0, dpooled, 0.0)
    grad_conv_b = dpre.sum(axis=0)
    grad_conv_w = kernels.conv_pool_backward(emb, argmax, dpre, params.kernel)
    grads = CnnParams(
        conv_w=grad_conv_w, conv_b=grad_conv_b, out_w=grad_out_w, out_b=grad_out_b
    )
    return loss, grads


def gradients(
    params: CnnParams,
    table: EmbeddingTable,
    docs: list[EncodedDoc],
    targets: np.ndarray,
    backend: str | None = None,
) -> tuple[float, CnnParams]:
    """Mean-BCE loss and its exact gradients w.r.t. every trainable tensor."""
    kernels = get_backend(backend)
    indices, lengths = pad_batch(docs, min_len=params.kernel)
    emb = _gather(table, indices)
    return _gradients_emb(params, emb, lengths, targets, kernels)


# --- optimization ----------------------------------------------------------


class _Adam:
    def __init__(self, params: CnnParams, lr: float):
        self.lr = lr
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.tensors().items()}
        self.v = {k: np.zeros_like(v) for k, v in params.tensors().items()}

    def step(self, params: CnnParams, grads: CnnParams) -> None:
        self.step_count += 1
        t = self.step_count
        g_tensors = grads.tensors()
        for name, tensor in params.tensors().items():
            g = g_tensors[name]
            m = self.m[name]
            v = self.v[name]
            m *= ADAM_BETA1
            m += (1 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1 - ADAM_BETA2) * np.square(g)
            m_hat = m / (1 - ADAM_BETA1**t)
            v_hat = v / (1 - ADAM_BETA2**t)
            tensor -= self.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def _micro_f1_matrix(gold01: np.ndarray, pred01: np.ndarray) -> float:
    tp = float(np.sum(gold01 * pred01))
    denom = float(np.sum(gold01) + np.sum(pred01))
    if denom == 0.0:
        return 1.0
    return 2.0 * tp / denom


def _predict_matrix(params, table, docs, threshold, batch_size, kernels):
    out = np.zeros((len(docs), params.out_b.shape[0]), dtype=np.float64)
    for start in range(0, len(docs), batch_size):
        chunk = docs[start : start + batch_size]
        indices, lengths = pad_batch(chunk, min_len=params.kernel)
        emb = _gather(table, indices)
        probs, _, _ = _forward_emb(params, emb, lengths, kernels)
        out[start : start + len(chunk)] = probs
    return out if threshold is None else (out >= threshold).astype(np.float64)


def train(
    config: CnnConfig,
    train_data: EncodedDataset,
    dev_data: EncodedDataset,
    table: EmbeddingTable,
    backend: str | None = None,
) -> tuple[CnnParams, TrainHistory]:
    """Train to the best dev-micro-F1 epoch and return those parameters.

    Stops early after ``config.patience`` consecutive epochs without a dev
    improvement; on ties the earliest best epoch wins.
    """
    if len(train_data) == 0 or len(dev_data) == 0:
        raise ValueError("train and dev sets must be nonempty")
    kernels = get_backend(backend)
    rng = np.random.default_rng(config.seed)
    params = init_params(config, rng)
    optimizer = _Adam(params, config.learning_rate)
    history = TrainHistory(backend=kernels.NAME)
    started = time.perf_counter()

    best_f1 = -1.0
    best_params = params.copy()
    best_epoch = 0
    epochs_since_best = 0
    n = len(train_data)

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch_ids = order[start : start + config.batch_size]
            docs = [train_data.docs[i] for i in batch_ids]
            targets = train_data.targets[batch_ids]
            indices, lengths = pad_batch(docs, min_len=config.kernel)
            emb = _gather(table, indices)
            loss, grads = _gradients_emb(params, emb, lengths, targets, kernels)
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                    f" (lr={config.learning_rate}, seed={config.seed})"
                )
            optimizer.step(params, grads)
            total_loss += loss * len(batch_ids)
        history.train_loss.append(total_loss / n)

        pred01 = _predict_matrix(
            params, table, dev_data.docs, config.threshold, config.batch_size, kernels
        )
        dev_f1 = _micro_f1_matrix(dev_data.targets, pred01)
        history.dev_f1.append(dev_f1)

        if dev_f1 > best_f1:
            best_f1 = dev_f1
            best_params = params.copy()
            best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= config.patience > 0:
                break

    history.chosen_epoch = best_epoch
    history.wall_time = time.perf_counter() - started
    return best_params, history


def predict_probs(
    params: CnnParams,
    table: EmbeddingTable,
    docs: list[EncodedDoc],
    backend: str | None = None,
    batch_size: int = 32,
) -> np.ndarray:
    kernels = get_backend(backend)
    return _predict_matrix(params, table, docs, None, batch_size, kernels)


def predict(
    params: CnnParams,
    table: EmbeddingTable,
    docs: list[EncodedDoc],
    threshold: float,
    label_order: tuple[str, ...] | None = None,
    backend: str | None = None,
    batch_size: int = 32,
) -> list[frozenset[str]]:
    """Label sets: every register whose probability reaches ``threshold``."""
    label_order = label_order or default_taxonomy().label_order
    probs = predict_probs(params, table, docs, backend=backend, batch_size=batch_size)
    out = []
    for row in probs:
        out.append(
            frozenset(code for code, p in zip(label_order, row) if p >= threshold)
        )
    return out
