"""Contrastive training, embedding, retrieval metrics and dataset statistics."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import model as mdl
from .augment import AugmentConfig, center_window, make_rng, make_views
from .errors import EmptyGallery, InsufficientIdentities
from .skeleton import NormalizedSequence, Tracklet, normalize_tracklet
from .supcon import LossConfig, loss_and_grad

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    ids_per_batch: int = 8
    views_per_id: int = 2
    steps: int = 600
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    temperature: float = 0.01
    seed: int = 7

    def __post_init__(self):
        if self.ids_per_batch < 2:
            raise ValueError("ids_per_batch must be >= 2")
        if self.views_per_id != 2:
            raise ValueError("training uses exactly two views per identity")
        if self.steps < 0 or self.lr < 0:
            raise ValueError("steps and lr must be non-negative")


class SequenceStore:
    """Normalized sequences grouped by identity, in first-seen order."""

    def __init__(self, items):
        self.sequences: list[NormalizedSequence] = []
        for it in items:
            self.sequences.append(normalize_tracklet(it) if isinstance(it, Tracklet) else it)
        self.by_identity: dict[int, list[int]] = {}
        for i, s in enumerate(self.sequences):
            ident = s.source_track_id if s.label is None else s.label
            self.by_identity.setdefault(int(ident), []).append(i)
        self.identities = list(self.by_identity)

    def __len__(self) -> int:
        return len(self.sequences)


def sample_batch(store: SequenceStore, aug: AugmentConfig, cfg: TrainConfig, rng: np.random.Generator):
    """``P`` distinct identities, each with two augmented views of one of its sequences."""
    P = cfg.ids_per_batch
    if len(store.identities) < P:
        raise InsufficientIdentities(f"need {P} identities, store has {len(store.identities)}")
    chosen = rng.choice(len(store.identities), size=P, replace=False)
    out = []
    for c in chosen:
        ident = store.identities[int(c)]
        members = store.by_identity[ident]
        seq = store.sequences[members[int(rng.integers(len(members)))]]
        a, b = make_views(seq, aug, rng)
        out.append((ident, a, b))
    return out


def batch_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    views, labels = [], []
    for ident, a, b in samples:
        views += [a, b]
        labels += [ident, ident]
    return mdl.sequences_to_batch(views), np.asarray(labels)


@dataclass
class _Adam:
    lr: float
    beta1: float
    beta2: float
    eps: float
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            g = g.astype(np.float32, copy=False)
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (self.lr / c1) * m / (np.sqrt(v / c2) + self.eps)
            params[name] = (params[name] - update).astype(np.float32)


@dataclass
class TrainResult:
    params: dict
    losses: list[float]


def train(store, model_cfg: mdl.ModelConfig | None = None, train_cfg: TrainConfig | None = None,
          aug_cfg: AugmentConfig | None = None, params: dict | None = None, progress=None) -> TrainResult:
    """Adam on the supervised contrastive loss of two-view batches.

    Fully determined by the store contents and the configs' seeds.
    """
    model_cfg = model_cfg or mdl.ModelConfig()
    cfg = train_cfg or TrainConfig()
    aug = aug_cfg or AugmentConfig(window_len=model_cfg.window_len)
    if not isinstance(store, SequenceStore):
        store = SequenceStore(store)
    graph = model_cfg.graph()
    params = {k: v.copy() for k, v in (params or mdl.init_params(model_cfg, cfg.seed)).items()}
    opt = _Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    rng = make_rng(cfg.seed, 0x7A1)
    losses = []
    for step in range(cfg.steps):
        batch, labels = batch_arrays(sample_batch(store, aug, cfg, rng))
        tr = mdl.trace(params, graph, batch, model_cfg)
        loss, g_emb = loss_and_grad(tr.embeddings.astype(np.float64), labels, cfg.temperature)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite loss at step {step}")
        grads = tr.backward(g_emb.astype(np.float32))
        opt.step(params, grads)
        losses.append(loss)
        if progress is not None:
            progress(step, loss)
        elif step % 100 == 0:
            log.debug("step %d loss %.5f", step, loss)
    return TrainResult(params, losses)


def embed_sequences(params, sequences, model_cfg: mdl.ModelConfig | None = None) -> np.ndarray:
    """Center-window embedding of each sequence, one forward pass per item."""
    model_cfg = model_cfg or mdl.ModelConfig()
    graph = model_cfg.graph()
    rows = []
    for s in sequences:
        win = center_window(s, model_cfg.window_len)
        rows.append(mdl.forward(params, graph, mdl.sequences_to_batch([win]), model_cfg)[0])
    if not rows:
        return np.zeros((0, model_cfg.embedding_dim), np.float32)
    return np.stack(rows)


@dataclass
class EmbeddingTable:
    track_ids: list[int]
    labels: list[int]
    runs: list
    vectors: np.ndarray


def embed_store(params, store, model_cfg: mdl.ModelConfig | None = None) -> EmbeddingTable:
    tracklets = list(store)
    seqs = [normalize_tracklet(t) for t in tracklets]
    vecs = embed_sequences(params, seqs, model_cfg)
    return EmbeddingTable(
        track_ids=[t.track_id for t in tracklets],
        labels=[t.identity for t in tracklets],
        runs=[t.run for t in tracklets],
        vectors=vecs,
    )


@dataclass
class RetrievalResult:
    rank1: float
    rank5: float
    nearest: list[tuple[int, int]]  # (probe index, nearest gallery index)

    def __post_init__(self):
        assert self.rank1 <= self.rank5 + 1e-12


def _ranking(gallery: np.ndarray, probe: np.ndarray) -> np.ndarray:
    g = np.asarray(gallery, np.float64)
    p = np.asarray(probe, np.float64)
    g = g / np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-12)
    p = p / np.maximum(np.linalg.norm(p, axis=1, keepdims=True), 1e-12)
    sim = p @ g.T
    # stable sort on negated similarity: ties go to the lower gallery index
    return np.argsort(-sim, axis=1, kind="stable")


def rank_k(gallery, gallery_labels, probe, probe_labels, k: int) -> float:
    if len(gallery) == 0:
        raise EmptyGallery("gallery is empty")
    if len(probe) == 0:
        return 0.0
    order = _ranking(gallery, probe)
    gl = np.asarray(gallery_labels)
    pl = np.asarray(probe_labels)
    hits = (gl[order[:, :k]] == pl[:, None]).any(axis=1)
    return float(hits.mean())


def evaluate(gallery, gallery_labels, probe, probe_labels) -> RetrievalResult:
    if len(gallery) == 0:
        raise EmptyGallery("gallery is empty")
    order = _ranking(gallery, probe) if len(probe) else np.zeros((0, len(gallery)), int)
    return RetrievalResult(
        rank1=rank_k(gallery, gallery_labels, probe, probe_labels, 1),
        rank5=rank_k(gallery, gallery_labels, probe, probe_labels, 5),
        nearest=[(i, int(order[i, 0])) for i in range(order.shape[0])],
    )


@dataclass
class DatasetStats:
    id_count: int
    total_frames: int
    total_walk_hours: float
    avg_run_length: float
    bin_width: int
    histogram: list[tuple[int, int, int]]  # (bin_start, bin_end, count)


def dataset_stats(store, fps: float = 24.0, bin_width: int = 24) -> DatasetStats:
    """Counts every tracklet as one tracker identity."""
    lengths = np.array([len(t) for t in store], dtype=np.int64)
    n = int(lengths.size)
    if n == 0:
        return DatasetStats(0, 0, 0.0, 0.0, bin_width, [])
    total = int(lengths.sum())
    nbins = int(lengths.max() // bin_width) + 1
    counts = np.bincount(lengths // bin_width, minlength=nbins)
    hist = [(b * bin_width, (b + 1) * bin_width, int(c)) for b, c in enumerate(counts)]
    return DatasetStats(
        id_count=n,
        total_frames=total,
        total_walk_hours=total / fps / 3600.0,
        avg_run_length=total / n,
        bin_width=bin_width,
        histogram=hist,
    )
