"""Small fixture builders shared by the test modules."""
from __future__ import annotations

import numpy as np

from gaitpipe.skeleton import Tracklet

# an upright frontal pose in pixels (x right, y down), hips at y=200, shoulders at y=150
_BASE = np.array([
    [100.0, 130.0],  # nose
    [103.0, 127.0], [97.0, 127.0],  # eyes
    [106.0, 129.0], [94.0, 129.0],  # ears
    [110.0, 150.0], [90.0, 150.0],  # shoulders (left is image-right)
    [113.0, 172.0], [87.0, 172.0],  # elbows
    [114.0, 192.0], [86.0, 192.0],  # wrists
    [106.0, 200.0], [94.0, 200.0],  # hips
    [107.0, 228.0], [93.0, 228.0],  # knees
    [107.0, 256.0], [93.0, 256.0],  # ankles
])


def pose(conf: float = 0.9, dx: float = 0.0, dy: float = 0.0, scale: float = 1.0) -> np.ndarray:
    out = np.empty((17, 3))
    out[:, :2] = _BASE * scale + np.array([dx, dy])
    out[:, 2] = conf
    return out


def walking_frames(n: int, conf: float = 0.9, stride: float = 4.0, drift: float = 2.0) -> np.ndarray:
    """Frames where knees and ankles oscillate and the body drifts right."""
    t = np.arange(n)
    frames = np.stack([pose(conf, dx=drift * k) for k in range(n)])
    swing = stride * np.sin(2 * np.pi * t / 24.0)
    for j, s in ((13, 1.0), (15, 1.0), (14, -1.0), (16, -1.0)):
        frames[:, j, 0] += s * swing
    return frames


def tracklet(frames, track_id: int = 0, **kw) -> Tracklet:
    return Tracklet(track_id=track_id, frames=np.asarray(frames, dtype=np.float64), **kw)


def random_skeletons(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random frontal-ish skeletons with well-separated shoulders and trunk."""
    base = np.broadcast_to(_BASE, (n, 17, 2)).copy()
    base += rng.normal(0.0, 3.0, size=base.shape)
    out = np.empty((n, 17, 3))
    out[..., :2] = base
    out[..., 2] = rng.uniform(0.0, 1.0, size=(n, 17))
    return out
