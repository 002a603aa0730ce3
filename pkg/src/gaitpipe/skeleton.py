"""Skeleton and tracklet types plus height/translation normalization.

Coordinates follow the COCO-17 keypoint order. A skeleton frame is stored as a
``(17, 3)`` float64 array of ``(x, y, confidence)``; a tracklet stacks frames
into ``(T, 17, 3)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTracklet

NUM_JOINTS = 17

JOINT_NAMES = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
)

L_SHOULDER, R_SHOULDER = 5, 6
L_HIP, R_HIP = 11, 12
L_KNEE, R_KNEE = 13, 14
L_ANKLE, R_ANKLE = 15, 16

LEFT_RIGHT_PAIRS = ((1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 12), (13, 14), (15, 16))

# per-frame denominators below this fraction of the tracklet median fall back to the median
FALLBACK_FRACTION = 0.1
MIN_MEDIAN_PX = 1.0


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    confidence: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("keypoint coordinates must be finite")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass
class Skeleton:
    """One frame of 17 keypoints, ``joints[i] = (x, y, confidence)``."""

    joints: np.ndarray

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        _check_frames(self.joints[None])

    @classmethod
    def from_keypoints(cls, keypoints) -> Skeleton:
        return cls(np.array([[k.x, k.y, k.confidence] for k in keypoints], dtype=np.float64))

    def keypoint(self, i: int) -> Keypoint:
        x, y, c = self.joints[i]
        return Keypoint(float(x), float(y), float(c))

    @property
    def xy(self) -> np.ndarray:
        return self.joints[:, :2]


@dataclass(frozen=True)
class DerivedJoints:
    pelvis: tuple[float, float]
    neck: tuple[float, float]
    shoulder_width: float
    trunk_length: float


@dataclass
class Tracklet:
    """Single-camera track: ``frames[i]`` is the skeleton at ``start_frame + i``."""

    track_id: int
    frames: np.ndarray
    fps: float = 24.0
    camera: str = "cam0"
    start_frame: int = 0
    # ground truth, when known (synthetic data or annotated sets)
    label: int | None = None
    run: int | None = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[0] == 0:
            raise ValueError("tracklet needs a nonempty (T, 17, 3) frame array")
        _check_frames(self.frames)
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        if self.start_frame < 0:
            raise ValueError("start_frame must be >= 0")

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def identity(self) -> int:
        return self.track_id if self.label is None else self.label

    @property
    def frame_indices(self) -> np.ndarray:
        return self.start_frame + np.arange(len(self))

    def skeleton(self, i: int) -> Skeleton:
        return Skeleton(self.frames[i])


@dataclass
class NormalizedSequence:
    """Unitless ``(T, 17, 2)`` coordinates with the pelvis at the origin."""

    frames: np.ndarray
    source_track_id: int = -1
    label: int | None = field(default=None, compare=False)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[1:] != (NUM_JOINTS, 2):
            raise ValueError(f"expected (T, 17, 2) frames, got {self.frames.shape}")

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    def __len__(self) -> int:
        return self.frames.shape[0]

    def replace(self, frames: np.ndarray) -> NormalizedSequence:
        return NormalizedSequence(frames, self.source_track_id, self.label)


def _check_frames(frames: np.ndarray) -> None:
    if frames.shape[1:] != (NUM_JOINTS, 3):
        raise ValueError(f"expected 17 joints of (x, y, c), got shape {frames.shape[1:]}")
    if not np.all(np.isfinite(frames[..., :2])):
        raise ValueError("joint coordinates must be finite")
    conf = frames[..., 2]
    if np.any(conf < 0.0) or np.any(conf > 1.0):
        raise ValueError("joint confidences must lie in [0, 1]")


def _as_xy(s) -> np.ndarray:
    arr = s.joints if isinstance(s, Skeleton) else np.asarray(s, dtype=np.float64)
    return arr[..., :2]


def _derived_arrays(xy: np.ndarray):
    """Vectorized pelvis, neck, shoulder width and trunk length over leading axes."""
    pelvis = 0.5 * (xy[..., L_HIP, :] + xy[..., R_HIP, :])
    neck = 0.5 * (xy[..., L_SHOULDER, :] + xy[..., R_SHOULDER, :])
    width = np.abs(xy[..., R_SHOULDER, 0] - xy[..., L_SHOULDER, 0])
    trunk = np.abs(neck[..., 1] - pelvis[..., 1])
    return pelvis, neck, width, trunk


def derived_joints(s) -> DerivedJoints:
    pelvis, neck, width, trunk = _derived_arrays(_as_xy(s))
    return DerivedJoints(
        pelvis=(float(pelvis[0]), float(pelvis[1])),
        neck=(float(neck[0]), float(neck[1])),
        shoulder_width=float(width),
        trunk_length=float(trunk),
    )


def _normalize_xy(xy: np.ndarray, fallback_width, fallback_trunk) -> np.ndarray:
    pelvis, _, width, trunk = _derived_arrays(xy)
    w = np.where(width >= FALLBACK_FRACTION * fallback_width, width, fallback_width)
    h = np.where(trunk >= FALLBACK_FRACTION * fallback_trunk, trunk, fallback_trunk)
    out = xy - pelvis[..., None, :]
    out[..., 0] /= np.asarray(w)[..., None]
    out[..., 1] /= np.asarray(h)[..., None]
    return out


def normalize_skeleton(s, fallback_width: float, fallback_trunk: float) -> np.ndarray:
    """Center on the pelvis, scale x by shoulder width and y by trunk length.

    A per-frame denominator under 10% of its fallback is replaced by the
    fallback, so the result is always finite. Returns a ``(17, 2)`` array.
    """
    if not (fallback_width > 0 and fallback_trunk > 0):
        raise ValueError("fallback denominators must be positive")
    return _normalize_xy(_as_xy(s).copy(), fallback_width, fallback_trunk)


def normalize_tracklet(t: Tracklet) -> NormalizedSequence:
    xy = t.frames[..., :2]
    _, _, width, trunk = _derived_arrays(xy)
    med_w = float(np.median(width))
    med_h = float(np.median(trunk))
    if med_w < MIN_MEDIAN_PX or med_h < MIN_MEDIAN_PX:
        raise DegenerateTracklet(
            f"track {t.track_id}: median shoulder width {med_w:.3g} px, "
            f"trunk length {med_h:.3g} px"
        )
    return NormalizedSequence(_normalize_xy(xy.copy(), med_w, med_h), t.track_id, t.label)
