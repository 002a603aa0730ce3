"""Parametric 2D walkers with known identities, for end-to-end checks.

Each identity draws a fixed gait: cadence, limb proportions, swing
amplitudes and inter-joint phase lags, plus a slow trunk-lean oscillation
(period roughly 7 to 12 s, amplitude 8 to 16 degrees by default). Runs of one
identity share all of these and differ only in phase origin (of both the
stride and the slow lean) and observation noise. The slow lean makes any
short window look unlike other windows of the same walker, which a
network has to learn to ignore. The body is seen from a frontal-oblique
viewpoint so shoulder width stays measurable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .augment import make_rng
from .skeleton import Tracklet

FPS = 24.0
NOISE_PX = 1.0


@dataclass(frozen=True)
class WalkerParams:
    cadence_hz: float
    height: float
    shoulder_width: float
    hip_width: float
    trunk: float
    thigh: float
    shin: float
    upper_arm: float
    forearm: float
    head: float
    hip_swing: float
    knee_flex: float
    knee_lag: float
    arm_swing: float
    arm_lag: float
    elbow_flex: float
    bob: float
    sway: float
    lean: float
    swing_projection: float
    speed: float
    origin: tuple[float, float]
    drift_amp: float = 0.0
    drift_hz: float = 0.0


def draw_walker(rng: np.random.Generator, origin=(200.0, 360.0), body_spread: float = 1.0,
                gait_spread: float = 1.0, height_range=(170.0, 230.0),
                drift_deg=(8.0, 16.0)) -> WalkerParams:
    def scaled(spread):
        def draw(lo, hi):
            mid, half = (lo + hi) / 2, (hi - lo) / 2
            return rng.uniform(mid - spread * half, mid + spread * half)
        return draw
    u, g = scaled(body_spread), scaled(gait_spread)
    height = rng.uniform(*height_range)
    cadence = rng.uniform(0.8, 1.4)
    thigh = u(0.22, 0.27) * height
    return WalkerParams(
        cadence_hz=cadence,
        height=height,
        shoulder_width=u(0.21, 0.29) * height,
        hip_width=u(0.13, 0.19) * height,
        trunk=u(0.27, 0.34) * height,
        thigh=thigh,
        shin=u(0.22, 0.27) * height,
        upper_arm=u(0.16, 0.20) * height,
        forearm=u(0.13, 0.17) * height,
        head=u(0.10, 0.14) * height,
        hip_swing=np.radians(g(14.0, 30.0)),
        knee_flex=np.radians(g(15.0, 55.0)),
        knee_lag=g(0.4, 1.6),
        arm_swing=np.radians(g(8.0, 35.0)),
        arm_lag=g(-0.6, 0.6),
        elbow_flex=np.radians(g(5.0, 35.0)),
        bob=g(0.008, 0.03) * height,
        sway=g(0.0, 0.025) * height,
        lean=np.radians(g(-8.0, 8.0)),
        swing_projection=u(0.55, 0.85),
        speed=2.0 * thigh * np.sin(np.radians(22.0)) * cadence / FPS,
        origin=(float(origin[0]), float(origin[1])),
        drift_amp=np.radians(rng.uniform(*drift_deg)),
        drift_hz=rng.uniform(0.08, 0.15),
    )


def render_walker(p: WalkerParams, frames: int, phase0: float, rng: np.random.Generator | None = None,
                  noise_px: float = NOISE_PX, start_frame: int = 0, drift_phase0: float = 0.0) -> np.ndarray:
    """Return ``(frames, 17, 3)`` pixel keypoints; confidences around 0.9."""
    t = np.arange(start_frame, start_frame + frames, dtype=np.float64)
    w = 2.0 * np.pi * p.cadence_hz / FPS
    ph = w * t + phase0
    k = p.swing_projection

    px = p.origin[0] + p.speed * t + p.sway * np.sin(ph)
    py = p.origin[1] - p.bob * np.cos(2.0 * ph)
    pelvis = np.stack([px, py], axis=-1)
    lean_t = p.lean + p.drift_amp * np.sin(2.0 * np.pi * p.drift_hz * t / FPS + drift_phase0)
    lean = np.stack([np.sin(lean_t), -np.cos(lean_t)], axis=-1)
    neck = pelvis + p.trunk * lean
    out = np.zeros((frames, 17, 2))

    # image-right is the subject's left (facing the camera)
    side = {"left": 1.0, "right": -1.0}
    for name, s in side.items():
        offset = 0.0 if name == "left" else np.pi
        hip = pelvis + np.array([s * p.hip_width / 2, 0.0])
        theta = p.hip_swing * np.sin(ph + offset)
        kappa = p.knee_flex * 0.5 * (1.0 + np.sin(ph + offset + p.knee_lag))
        knee = hip + p.thigh * np.stack([k * np.sin(theta), np.cos(theta)], -1)
        ankle = knee + p.shin * np.stack([k * np.sin(theta - kappa), np.cos(theta - kappa)], -1)

        shoulder = neck + np.array([s * p.shoulder_width / 2, 0.0])
        alpha = p.arm_swing * np.sin(ph + offset + np.pi + p.arm_lag)
        eps = p.elbow_flex * 0.5 * (1.0 + np.sin(ph + offset + np.pi + p.arm_lag + 0.8))
        elbow = shoulder + p.upper_arm * np.stack([k * np.sin(alpha), np.cos(alpha)], -1)
        wrist = elbow + p.forearm * np.stack([k * np.sin(alpha + eps), np.cos(alpha + eps)], -1)

        base = 0 if name == "left" else 1
        out[:, 11 + base] = hip
        out[:, 13 + base] = knee
        out[:, 15 + base] = ankle
        out[:, 5 + base] = shoulder
        out[:, 7 + base] = elbow
        out[:, 9 + base] = wrist

    nose = neck + p.head * 0.6 * lean
    out[:, 0] = nose
    eye_dx, ear_dx = 0.12 * p.head, 0.28 * p.head
    out[:, 1] = nose + np.array([eye_dx, -0.15 * p.head])
    out[:, 2] = nose + np.array([-eye_dx, -0.15 * p.head])
    out[:, 3] = nose + np.array([ear_dx, -0.05 * p.head])
    out[:, 4] = nose + np.array([-ear_dx, -0.05 * p.head])

    skel = np.empty((frames, 17, 3))
    if rng is not None:
        skel[..., :2] = out + rng.normal(0.0, noise_px, size=out.shape)
        skel[..., 2] = np.clip(rng.normal(0.9, 0.03, size=(frames, 17)), 0.75, 1.0)
    else:
        skel[..., :2] = out
        skel[..., 2] = 0.9
    return skel


def generate_synthetic_walkers(n_ids: int = 32, runs_per_id: int = 4, frames: int = 108,
                               seed: int = 7, body_spread: float = 1.0, gait_spread: float = 1.0,
                               height_range=(170.0, 230.0), drift_deg=(8.0, 16.0)) -> list[Tracklet]:
    """Tracklets labelled by identity; runs are numbered from 1.

    ``track_id = identity * runs_per_id + (run - 1)``.
    """
    out = []
    for ident in range(n_ids):
        params = draw_walker(make_rng(seed, 1, ident), body_spread=body_spread,
                             gait_spread=gait_spread, height_range=height_range, drift_deg=drift_deg)
        for run in range(1, runs_per_id + 1):
            rng = make_rng(seed, 2, ident, run)
            phase0, drift0 = rng.uniform(0.0, 2.0 * np.pi, size=2)
            skel = render_walker(params, frames, float(phase0), rng, drift_phase0=float(drift0))
            out.append(Tracklet(
                track_id=ident * runs_per_id + run - 1,
                frames=skel,
                fps=FPS,
                camera="synth",
                start_frame=0,
                label=ident,
                run=run,
            ))
    return out
