"""Supervised contrastive loss with its analytic gradient.

For anchor ``i`` with positives ``P(i)`` (same label, excluding ``i``) and
all others ``A(i)``::

    L_i = -1/|P(i)| * sum_{p in P(i)} log( exp(z_i.z_p / t) / sum_{a in A(i)} exp(z_i.z_a / t) )

and the loss is the mean of ``L_i`` over anchors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoPositive

NORM_TOL = 1e-5


@dataclass
class EmbeddingBatch:
    vectors: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors)
        self.labels = np.asarray(self.labels)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 2:
            raise ValueError("need an N x D array with N >= 2")
        if self.labels.shape != (self.vectors.shape[0],):
            raise ValueError("one label per embedding row")
        norms = np.linalg.norm(self.vectors.astype(np.float64), axis=1)
        if np.any(np.abs(norms - 1.0) > NORM_TOL):
            raise ValueError("embedding rows must have unit norm")
        _check_positives(self.labels)


@dataclass
class LossConfig:
    temperature: float = 0.01

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")


def _check_positives(labels: np.ndarray) -> None:
    _, counts = np.unique(labels, return_counts=True)
    if np.any(counts < 2):
        raise NoPositive("every label needs at least two members in the batch")


def loss_and_grad(z: np.ndarray, labels, temperature: float) -> tuple[float, np.ndarray]:
    """Loss and ``dL/dz`` for raw vectors ``z`` (no norm check)."""
    labels = np.asarray(labels)
    _check_positives(labels)
    z = np.asarray(z)
    n = z.shape[0]
    logits = (z @ z.T) / temperature
    off_diag = ~np.eye(n, dtype=bool)
    positive = (labels[:, None] == labels[None, :]) & off_diag
    n_pos = positive.sum(axis=1)

    masked = np.where(off_diag, logits, -np.inf)
    row_max = masked.max(axis=1, keepdims=True)
    shifted = masked - row_max
    exp = np.exp(shifted)
    denom = exp.sum(axis=1, keepdims=True)
    log_prob = shifted - np.log(denom)
    per_anchor = -np.where(positive, log_prob, 0.0).sum(axis=1) / n_pos
    loss = float(per_anchor.mean())

    # dL/dlogits: (softmax - positive/|P|) / n, zero on the diagonal
    g_logits = (exp / denom - positive / n_pos[:, None]) / n
    g_logits = np.where(off_diag, g_logits, 0.0)
    grad = (g_logits + g_logits.T) @ z / temperature
    return loss, grad.astype(z.dtype, copy=False)


def supcon_loss(batch: EmbeddingBatch, cfg: LossConfig | None = None) -> tuple[float, np.ndarray]:
    cfg = cfg or LossConfig()
    return loss_and_grad(batch.vectors, batch.labels, cfg.temperature)


def supcon_grad_check(batch: EmbeddingBatch, cfg: LossConfig | None = None, h: float = 1e-5) -> float:
    """Max relative error between the analytic gradient and central differences (float64)."""
    cfg = cfg or LossConfig()
    z = np.asarray(batch.vectors, dtype=np.float64)
    _, analytic = loss_and_grad(z, batch.labels, cfg.temperature)
    numeric = np.zeros_like(z)
    for idx in np.ndindex(*z.shape):
        zp = z.copy()
        zm = z.copy()
        zp[idx] += h
        zm[idx] -= h
        lp, _ = loss_and_grad(zp, batch.labels, cfg.temperature)
        lm, _ = loss_and_grad(zm, batch.labels, cfg.temperature)
        numeric[idx] = (lp - lm) / (2 * h)
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-12)
    return float(np.abs(analytic - numeric).max() / scale)
