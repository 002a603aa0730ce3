"""SORT-style multi-person tracking of skeleton detections.

Each track is a constant-velocity Kalman filter over the joint bounding box
``(cx, cy, area, aspect)``; detections are assigned to predicted boxes by
maximum total IoU.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import NonMonotonicFrames
from .skeleton import Tracklet

BBOX_MIN_CONF = 0.05
HUNGARIAN_MAX_TRACKS = 64

# constant-velocity transition over (cx, cy, area, aspect, vcx, vcy, varea)
_F = np.eye(7)
_F[0, 4] = _F[1, 5] = _F[2, 6] = 1.0
_H = np.eye(4, 7)

# noise settings of the reference SORT tracker
_R = np.diag([1.0, 1.0, 10.0, 10.0])
_Q = np.diag([1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4])
_P0 = np.diag([10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4])


@dataclass
class Detection:
    frame_idx: int
    skeleton: np.ndarray  # (17, 3)
    bbox: tuple[float, float, float, float] = None

    def __post_init__(self):
        self.skeleton = np.asarray(self.skeleton, dtype=np.float64)
        if self.bbox is None:
            self.bbox = skeleton_bbox(self.skeleton)


@dataclass
class TrackerConfig:
    iou_threshold: float = 0.3
    max_age: int = 8
    min_hits: int = 3
    fps: float = 24.0
    camera: str = "cam0"


@dataclass
class TrackState:
    mean: np.ndarray
    cov: np.ndarray
    track_id: int = -1
    age: int = 0
    time_since_update: int = 0
    hit_streak: int = 0
    hits: int = 0


def skeleton_bbox(skel: np.ndarray) -> tuple[float, float, float, float]:
    """Axis-aligned bounds over joints with confidence >= 0.05 (all joints if none qualify)."""
    skel = np.asarray(skel)
    keep = skel[:, 2] >= BBOX_MIN_CONF
    pts = skel[keep, :2] if keep.any() else skel[:, :2]
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    return float(x0), float(y0), float(x1), float(y1)


def iou(a, b) -> float:
    xx0, yy0 = max(a[0], b[0]), max(a[1], b[1])
    xx1, yy1 = min(a[2], b[2]), min(a[3], b[3])
    inter = max(0.0, xx1 - xx0) * max(0.0, yy1 - yy0)
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    if union <= 0.0:
        return 0.0
    return float(min(1.0, max(0.0, inter / union)))


def bbox_to_z(bbox) -> np.ndarray:
    x0, y0, x1, y1 = bbox
    # points and zero-extent boxes still need a positive area/aspect
    w = max(x1 - x0, 1e-3)
    h = max(y1 - y0, 1e-3)
    return np.array([x0 + w / 2.0, y0 + h / 2.0, w * h, w / h])


def state_to_bbox(mean: np.ndarray) -> tuple[float, float, float, float]:
    area = max(mean[2], 1e-6)
    aspect = max(mean[3], 1e-6)
    w = np.sqrt(area * aspect)
    h = area / w
    cx, cy = mean[0], mean[1]
    return float(cx - w / 2), float(cy - h / 2), float(cx + w / 2), float(cy + h / 2)


def init_state(bbox, track_id: int = -1) -> TrackState:
    mean = np.zeros(7)
    mean[:4] = bbox_to_z(bbox)
    return TrackState(mean=mean, cov=_P0.copy(), track_id=track_id)


def predict(ts: TrackState) -> TrackState:
    mean = ts.mean.copy()
    if mean[2] + mean[6] <= 0:
        mean[6] = 0.0
    mean = _F @ mean
    cov = _F @ ts.cov @ _F.T + _Q
    cov = 0.5 * (cov + cov.T)
    return replace(
        ts,
        mean=mean,
        cov=cov,
        age=ts.age + 1,
        hit_streak=0 if ts.time_since_update > 0 else ts.hit_streak,
        time_since_update=ts.time_since_update + 1,
    )


def update(ts: TrackState, d) -> TrackState:
    """Kalman measurement update with the detection's box (Joseph-form covariance)."""
    bbox = d.bbox if isinstance(d, Detection) else d
    z = bbox_to_z(bbox)
    innov = z - _H @ ts.mean
    S = _H @ ts.cov @ _H.T + _R
    K = np.linalg.solve(S, _H @ ts.cov).T
    mean = ts.mean + K @ innov
    ikh = np.eye(7) - K @ _H
    cov = ikh @ ts.cov @ ikh.T + K @ _R @ K.T
    cov = 0.5 * (cov + cov.T)
    return replace(
        ts,
        mean=mean,
        cov=cov,
        time_since_update=0,
        hit_streak=ts.hit_streak + 1,
        hits=ts.hits + 1,
    )


def iou_matrix(boxes_a: Sequence, boxes_b: Sequence) -> np.ndarray:
    out = np.zeros((len(boxes_a), len(boxes_b)))
    for i, a in enumerate(boxes_a):
        for j, b in enumerate(boxes_b):
            out[i, j] = iou(a, b)
    return out


def _greedy(scores: np.ndarray) -> list[tuple[int, int]]:
    order = sorted(
        ((-scores[i, j], i, j) for i in range(scores.shape[0]) for j in range(scores.shape[1])),
    )
    used_r, used_c, pairs = set(), set(), []
    for _, i, j in order:
        if i in used_r or j in used_c:
            continue
        used_r.add(i)
        used_c.add(j)
        pairs.append((i, j))
    return pairs


def associate(tracks: Sequence, dets: Sequence, iou_threshold: float = 0.3):
    """Assign detections to predicted track boxes.

    ``tracks`` are boxes, ``dets`` are :class:`Detection` objects or boxes.
    Returns ``(matches, unmatched_tracks, unmatched_dets)`` where matches are
    ``(track_index, det_index)`` pairs sorted by track index.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError("iou_threshold must lie in [0, 1]")
    det_boxes = [d.bbox if isinstance(d, Detection) else d for d in dets]
    if not tracks or not det_boxes:
        return [], list(range(len(tracks))), list(range(len(det_boxes)))
    scores = iou_matrix(tracks, det_boxes)
    if len(tracks) <= HUNGARIAN_MAX_TRACKS:
        rows, cols = linear_sum_assignment(scores, maximize=True)
        pairs = list(zip(rows.tolist(), cols.tolist()))
    else:
        pairs = _greedy(scores)
    matches = sorted((i, j) for i, j in pairs if scores[i, j] >= iou_threshold)
    matched_t = {i for i, _ in matches}
    matched_d = {j for _, j in matches}
    unmatched_t = [i for i in range(len(tracks)) if i not in matched_t]
    unmatched_d = [j for j in range(len(det_boxes)) if j not in matched_d]
    return matches, unmatched_t, unmatched_d


@dataclass
class _LiveTrack:
    state: TrackState
    observations: list = field(default_factory=list)  # (frame_idx, skeleton)
    confirmed: bool = False


def _emit(track: _LiveTrack, cfg: TrackerConfig) -> Tracklet:
    first = track.observations[0][0]
    last = track.observations[-1][0]
    frames = np.empty((last - first + 1, 17, 3))
    obs = iter(track.observations)
    cur_idx, cur = next(obs)
    pending = next(obs, None)
    for k in range(last - first + 1):
        idx = first + k
        if pending is not None and pending[0] == idx:
            cur_idx, cur = pending
            pending = next(obs, None)
        frames[k] = cur
    return Tracklet(
        track_id=track.state.track_id,
        frames=frames,
        fps=cfg.fps,
        camera=cfg.camera,
        start_frame=first,
    )


def _normalize_frames(frames) -> Iterable[tuple[int, list]]:
    for item in frames:
        if isinstance(item, tuple) and len(item) == 2 and not isinstance(item[0], Detection):
            idx, dets = item
            yield int(idx), list(dets)
        else:
            dets = list(item)
            if not dets:
                raise ValueError("bare detection lists must be nonempty; pass (frame_idx, dets) pairs")
            yield dets[0].frame_idx, dets


def track_stream(frames, config: TrackerConfig | None = None) -> list[Tracklet]:
    """Run the tracker over a stream of frames.

    ``frames`` yields ``(frame_idx, detections)`` pairs (or nonempty detection
    lists). Missing frame indices count as empty frames. Returns the
    confirmed tracklets ordered by track id.
    """
    cfg = config or TrackerConfig()
    live: list[_LiveTrack] = []
    done: list[Tracklet] = []
    next_id = 0
    prev_idx = None

    def retire(t: _LiveTrack):
        if t.confirmed:
            done.append(_emit(t, cfg))

    for frame_idx, dets in _normalize_frames(frames):
        if prev_idx is not None and frame_idx <= prev_idx:
            raise NonMonotonicFrames(f"frame {frame_idx} follows frame {prev_idx}")
        steps = 1 if prev_idx is None else frame_idx - prev_idx
        prev_idx = frame_idx

        for t in live:
            for _ in range(steps):
                t.state = predict(t.state)
        survivors = []
        for t in live:
            if t.state.time_since_update > cfg.max_age:
                retire(t)
            else:
                survivors.append(t)
        live = survivors

        predicted = [state_to_bbox(t.state.mean) for t in live]
        matches, _, unmatched = associate(predicted, dets, cfg.iou_threshold)
        for ti, di in matches:
            t = live[ti]
            t.state = update(t.state, dets[di])
            t.observations.append((frame_idx, dets[di].skeleton))
            if not t.confirmed and t.state.hit_streak >= cfg.min_hits:
                t.confirmed = True
                t.state = replace(t.state, track_id=next_id)
                next_id += 1
        for di in unmatched:
            t = _LiveTrack(init_state(dets[di].bbox))
            t.state = replace(t.state, hit_streak=1, hits=1)
            t.observations.append((frame_idx, dets[di].skeleton))
            if cfg.min_hits <= 1:
                t.confirmed = True
                t.state = replace(t.state, track_id=next_id)
                next_id += 1
            live.append(t)

    for t in live:
        retire(t)
    done.sort(key=lambda tr: tr.track_id)
    return done
