"""Tracklet admission filters: confidence, feet visibility, length, walking motion."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegenerateTracklet, TooShort
from .skeleton import L_ANKLE, L_KNEE, R_ANKLE, R_KNEE, NormalizedSequence, Tracklet, normalize_tracklet

LEG_JOINTS = (L_KNEE, R_KNEE, L_ANKLE, R_ANKLE)


class Reason(str, Enum):
    PASS = "Pass"
    LOW_CONFIDENCE = "LowConfidence"
    FEET_OCCLUSION = "FeetOcclusion"
    TOO_SHORT = "TooShort"
    TOO_LONG = "TooLong"
    NOT_WALKING = "NotWalking"
    DEGENERATE = "Degenerate"


@dataclass
class FilterConfig:
    min_mean_conf: float = 0.60
    feet_conf_floor: float = 0.50
    max_consec_low_feet: int = 3
    min_len: int = 54
    max_len: int = 900
    min_leg_velocity: float = 0.01

    def __post_init__(self):
        for name in ("min_mean_conf", "feet_conf_floor", "max_consec_low_feet",
                     "min_len", "max_len", "min_leg_velocity"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.min_len > self.max_len:
            raise ValueError("min_len must not exceed max_len")


@dataclass
class Verdict:
    track_id: int
    passed: bool
    reason: Reason
    leg_velocity: float | None = None


@dataclass
class FilterReport:
    verdicts: list[Verdict] = field(default_factory=list)

    def add(self, v: Verdict) -> None:
        self.verdicts.append(v)

    @property
    def counts(self) -> dict[str, int]:
        c = Counter(v.reason.value for v in self.verdicts)
        return {r.value: c.get(r.value, 0) for r in Reason}

    @property
    def admitted(self) -> list[int]:
        return [v.track_id for v in self.verdicts if v.passed]


def exact_mean(values) -> float:
    """Mean shifted by the first element and summed with ``math.fsum``.

    A constant array returns its value exactly, so boundary fixtures sitting
    on a threshold compare as intended.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    ref = float(v[0])
    return ref + math.fsum((v - ref).tolist()) / v.size


def mean_confidence_ok(t: Tracklet, cfg: FilterConfig) -> bool:
    return exact_mean(t.frames[..., 2]) > cfg.min_mean_conf


def longest_run(mask: np.ndarray) -> int:
    best = cur = 0
    for flag in np.asarray(mask, dtype=bool):
        cur = cur + 1 if flag else 0
        best = max(best, cur)
    return best


def feet_visibility_ok(t: Tracklet, cfg: FilterConfig) -> bool:
    feet = 0.5 * (t.frames[:, L_ANKLE, 2] + t.frames[:, R_ANKLE, 2])
    return longest_run(feet < cfg.feet_conf_floor) <= cfg.max_consec_low_feet


def length_ok(t, cfg: FilterConfig) -> bool:
    return cfg.min_len <= len(t) <= cfg.max_len


def leg_velocity(ns: NormalizedSequence) -> float:
    """Mean per-frame displacement of knees and ankles, in normalized units."""
    if ns.length < 2:
        raise TooShort("leg velocity needs at least two frames")
    legs = ns.frames[:, LEG_JOINTS, :]
    step = np.linalg.norm(np.diff(legs, axis=0), axis=-1)
    return exact_mean(step)


def walking_ok(ns: NormalizedSequence, cfg: FilterConfig) -> bool:
    return leg_velocity(ns) >= cfg.min_leg_velocity


def run_filters(t: Tracklet, cfg: FilterConfig | None = None) -> Verdict:
    cfg = cfg or FilterConfig()
    if len(t) < cfg.min_len:
        return Verdict(t.track_id, False, Reason.TOO_SHORT)
    if len(t) > cfg.max_len:
        return Verdict(t.track_id, False, Reason.TOO_LONG)
    if not mean_confidence_ok(t, cfg):
        return Verdict(t.track_id, False, Reason.LOW_CONFIDENCE)
    if not feet_visibility_ok(t, cfg):
        return Verdict(t.track_id, False, Reason.FEET_OCCLUSION)
    try:
        ns = normalize_tracklet(t)
    except DegenerateTracklet:
        return Verdict(t.track_id, False, Reason.DEGENERATE)
    v = leg_velocity(ns)
    if v < cfg.min_leg_velocity:
        return Verdict(t.track_id, False, Reason.NOT_WALKING, v)
    return Verdict(t.track_id, True, Reason.PASS, v)


def filter_tracklets(tracklets, cfg: FilterConfig | None = None):
    """Apply :func:`run_filters` to every tracklet; returns ``(admitted, report)``."""
    report = FilterReport()
    admitted = []
    for t in tracklets:
        v = run_filters(t, cfg)
        report.add(v)
        if v.passed:
            admitted.append(t)
    return admitted, report
