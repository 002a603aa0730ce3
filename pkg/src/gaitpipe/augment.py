"""Random views of normalized gait sequences for contrastive training.

All randomness comes from ``numpy.random.Generator`` over the Philox
counter-based bit generator, seeded through ``SeedSequence``; streams are
identical on every platform for a given seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySequence, TooShort
from .skeleton import LEFT_RIGHT_PAIRS, NUM_JOINTS, NormalizedSequence

PACE_FACTORS = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)


@dataclass
class AugmentConfig:
    window_len: int = 54
    pace_factors: tuple[float, ...] = PACE_FACTORS
    shuffle_segments: int = 3
    squeeze_range: tuple[float, float] = (0.8, 1.2)
    p_shuffle: float = 0.5
    p_squeeze: float = 0.5
    p_flip: float = 0.5
    p_mirror: float = 0.5
    p_joint_drop: float = 0.1
    p_frame_drop: float = 0.05
    seed: int = 0

    def __post_init__(self):
        self.pace_factors = tuple(float(f) for f in self.pace_factors)
        self.squeeze_range = tuple(float(s) for s in self.squeeze_range)
        if self.window_len < 2:
            raise ValueError("window_len must be >= 2")
        if not self.pace_factors or any(f <= 0 for f in self.pace_factors):
            raise ValueError("pace factors must be positive")
        if self.shuffle_segments < 1:
            raise ValueError("shuffle_segments must be >= 1")
        for name in ("p_shuffle", "p_squeeze", "p_flip", "p_mirror", "p_joint_drop", "p_frame_drop"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")
        lo, hi = self.squeeze_range
        if not 0 < lo <= hi:
            raise ValueError("squeeze_range must satisfy 0 < lo <= hi")


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for ``seed``, optionally split by extra stream keys (e.g. a track id)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(s) & 0xFFFFFFFFFFFFFFFF for s in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def _frames(seq) -> np.ndarray:
    return seq.frames if isinstance(seq, NormalizedSequence) else np.asarray(seq, dtype=np.float64)


def _wrap(seq, frames: np.ndarray):
    return seq.replace(frames) if isinstance(seq, NormalizedSequence) else frames


def sample_window(ns, length: int, rng: np.random.Generator):
    x = _frames(ns)
    T = x.shape[0]
    if T == 0:
        raise EmptySequence("cannot window an empty sequence")
    if T >= length:
        start = int(rng.integers(0, T - length + 1))
        out = x[start:start + length]
    else:
        # too short: repeat from the start
        out = x[np.arange(length) % T]
    return _wrap(ns, out.copy())


def pace_resample(seq, factor: float, out_len: int):
    """Linear interpolation at times ``i * factor * (T-1) / (out_len-1)``, clamped to the last frame."""
    x = _frames(seq)
    T = x.shape[0]
    if factor <= 0:
        raise ValueError("pace factor must be positive")
    if T < 2:
        raise TooShort("pace resampling needs at least two frames")
    if out_len == 1:
        times = np.zeros(1)
    else:
        times = np.arange(out_len) * (factor * (T - 1) / (out_len - 1))
    times = np.clip(times, 0.0, T - 1)
    lo = np.minimum(np.floor(times).astype(np.int64), T - 2)
    frac = (times - lo)[:, None, None]
    out = x[lo] * (1.0 - frac) + x[lo + 1] * frac
    return _wrap(seq, out)


def shuffle_segments(seq, k: int, rng: np.random.Generator):
    x = _frames(seq)
    if not 1 <= k <= x.shape[0]:
        raise ValueError(f"segment count {k} outside [1, {x.shape[0]}]")
    parts = np.array_split(np.arange(x.shape[0]), k)
    order = rng.permutation(k)
    idx = np.concatenate([parts[i] for i in order])
    return _wrap(seq, x[idx].copy())


_MIRROR_PERM = np.arange(NUM_JOINTS)
for _l, _r in LEFT_RIGHT_PAIRS:
    _MIRROR_PERM[_l], _MIRROR_PERM[_r] = _r, _l


def mirror(seq):
    """Reflect left-right: negate x and swap left/right joint labels."""
    out = _frames(seq)[:, _MIRROR_PERM, :].copy()
    out[..., 0] = -out[..., 0]
    return _wrap(seq, out)


def flip(seq):
    """Reverse time."""
    return _wrap(seq, _frames(seq)[::-1].copy())


def squeeze(seq, s: float):
    out = _frames(seq).copy()
    out[..., 0] *= s
    return _wrap(seq, out)


def dropout(seq, p_joint: float, p_frame: float, rng: np.random.Generator):
    x = _frames(seq).copy()
    T, V = x.shape[:2]
    joint_mask = rng.random((T, V)) < p_joint
    x[joint_mask] = 0.0
    frame_mask = rng.random(T) < p_frame
    for t in range(1, T):
        if frame_mask[t]:
            x[t] = x[t - 1]
    return _wrap(seq, x)


def augment_view(ns, cfg: AugmentConfig, rng: np.random.Generator):
    factor = cfg.pace_factors[int(rng.integers(len(cfg.pace_factors)))]
    span = max(2, int(round(cfg.window_len * factor)))
    view = sample_window(ns, span, rng)
    view = pace_resample(view, 1.0, cfg.window_len)
    # one draw per switch keeps the stream layout fixed regardless of outcomes
    draws = rng.random(4)
    if draws[0] < cfg.p_shuffle:
        view = shuffle_segments(view, min(cfg.shuffle_segments, cfg.window_len), rng)
    if draws[1] < cfg.p_squeeze:
        view = squeeze(view, float(rng.uniform(*cfg.squeeze_range)))
    if draws[2] < cfg.p_flip:
        view = flip(view)
    if draws[3] < cfg.p_mirror:
        view = mirror(view)
    if cfg.p_joint_drop > 0 or cfg.p_frame_drop > 0:
        view = dropout(view, cfg.p_joint_drop, cfg.p_frame_drop, rng)
    return view


def make_views(ns, cfg: AugmentConfig, rng: np.random.Generator):
    """Two independently augmented ``window_len``-frame views of one sequence."""
    if len(_frames(ns)) == 0:
        raise EmptySequence("cannot augment an empty sequence")
    return augment_view(ns, cfg, rng), augment_view(ns, cfg, rng)


def center_window(ns, length: int):
    """Deterministic middle crop (start-repeat padded when too short), used for evaluation."""
    x = _frames(ns)
    T = x.shape[0]
    if T == 0:
        raise EmptySequence("cannot window an empty sequence")
    if T < length:
        return _wrap(ns, x[np.arange(length) % T].copy())
    start = (T - length) // 2
    return _wrap(ns, x[start:start + length].copy())
