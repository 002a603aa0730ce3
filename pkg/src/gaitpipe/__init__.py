"""Skeleton gait toolkit: tracking, quality filtering, augmentation and a contrastive ST-GCN encoder."""
from __future__ import annotations

from .augment import AugmentConfig, make_views, pace_resample
from .errors import GaitPipeError
from .model import ModelConfig, build_graph, forward, init_params
from .quality import FilterConfig, Reason, filter_tracklets, run_filters
from .skeleton import NormalizedSequence, Skeleton, Tracklet, normalize_skeleton, normalize_tracklet
from .supcon import EmbeddingBatch, LossConfig, supcon_loss
from .synth import generate_synthetic_walkers
from .tracking import Detection, TrackerConfig, track_stream
from .train import TrainConfig, dataset_stats, embed_store, evaluate, rank_k

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig", "Detection", "EmbeddingBatch", "FilterConfig", "GaitPipeError", "LossConfig",
    "ModelConfig", "NormalizedSequence", "Reason", "Skeleton", "TrackerConfig", "TrainConfig", "Tracklet",
    "build_graph", "dataset_stats", "embed_store", "evaluate", "filter_tracklets", "forward",
    "generate_synthetic_walkers", "init_params", "make_views", "normalize_skeleton", "normalize_tracklet",
    "pace_resample", "rank_k", "run_filters", "supcon_loss", "track_stream",
]
