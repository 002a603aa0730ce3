from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitpipe.errors import DegenerateTracklet
from gaitpipe.skeleton import (
    Keypoint, NormalizedSequence, Skeleton, Tracklet, derived_joints, normalize_skeleton, normalize_tracklet,
)
from helpers import pose, random_skeletons, tracklet
from oracles import normalize_loop


def test_hand_worked_example():
    s = np.zeros((17, 3))
    s[:, 2] = 0.9
    s[5, :2] = (110, 150)
    s[6, :2] = (90, 150)
    s[11, :2] = (100, 200)
    s[12, :2] = (100, 200)
    s[0, :2] = (110, 175)
    d = derived_joints(s)
    assert d.pelvis == (100.0, 200.0)
    assert d.neck == (100.0, 150.0)
    assert d.shoulder_width == 20.0 and d.trunk_length == 50.0
    out = normalize_skeleton(s, 20.0, 50.0)
    assert out[0] == pytest.approx([0.5, -0.5], abs=1e-15)
    assert np.array_equal(out[11], [0.0, 0.0])


def test_similarity_example():
    s = pose()
    moved = s.copy()
    moved[:, :2] = 3.0 * s[:, :2] + np.array([7.0, -4.0])
    a = normalize_tracklet(tracklet([s])).frames
    b = normalize_tracklet(tracklet([moved])).frames
    assert np.max(np.abs(a - b)) < 1e-12


def test_derived_joints_reads_only_torso_joints():
    s = pose()
    other = s.copy()
    keep = [5, 6, 11, 12]
    mask = np.ones(17, bool)
    mask[keep] = False
    other[mask, :2] = np.random.default_rng(0).normal(size=(13, 2)) * 100
    assert derived_joints(s) == derived_joints(other)


def test_matches_loop_oracle():
    rng = np.random.default_rng(3)
    frames = random_skeletons(rng, 40)
    frames[7, 6, 0] = frames[7, 5, 0] + 0.5  # collapsed shoulders in one frame
    ours = normalize_tracklet(tracklet(frames)).frames
    ref = np.array(normalize_loop(frames.tolist()))
    assert np.max(np.abs(ours - ref)) < 1e-12


def test_profile_frame_uses_median_width():
    frames = np.stack([pose() for _ in range(9)])
    frames[4, 5, 0] = 100.5
    frames[4, 6, 0] = 99.5  # per-frame width 1 = 0.05 * median 20
    ns = normalize_tracklet(tracklet(frames))
    assert ns.frames[4, 5, 0] == pytest.approx(0.5 / 20.0)
    assert np.array_equal(ns.frames[0], ns.frames[1])


def test_identical_frames_stay_identical():
    ns = normalize_tracklet(tracklet(np.stack([pose()] * 54)))
    assert ns.length == 54
    assert np.all(ns.frames == ns.frames[0])


def test_all_zero_skeletons_are_degenerate():
    with pytest.raises(DegenerateTracklet):
        normalize_tracklet(tracklet(np.zeros((10, 17, 3))))


def test_pelvis_is_origin():
    ns = normalize_tracklet(tracklet(random_skeletons(np.random.default_rng(1), 25)))
    pelvis = 0.5 * (ns.frames[:, 11] + ns.frames[:, 12])
    assert np.max(np.abs(pelvis)) < 1e-12


def test_label_passes_through():
    ns = normalize_tracklet(tracklet([pose()], track_id=4, label=9))
    assert ns.source_track_id == 4 and ns.label == 9


@pytest.mark.parametrize("bad", [
    lambda f: f.__setitem__((0, 0, 2), 1.5),
    lambda f: f.__setitem__((0, 0, 0), np.nan),
])
def test_tracklet_validation(bad):
    frames = np.stack([pose()])
    bad(frames)
    with pytest.raises(ValueError):
        Tracklet(0, frames)


def test_tracklet_rejects_empty_and_bad_shape():
    with pytest.raises(ValueError):
        Tracklet(0, np.zeros((0, 17, 3)))
    with pytest.raises(ValueError):
        Tracklet(0, np.zeros((3, 16, 3)))
    with pytest.raises(ValueError):
        NormalizedSequence(np.zeros((3, 17, 3)))


def test_keypoint_and_skeleton_round_trip():
    s = Skeleton(pose())
    kps = [s.keypoint(i) for i in range(17)]
    assert np.array_equal(Skeleton.from_keypoints(kps).joints, s.joints)
    with pytest.raises(ValueError):
        Keypoint(0.0, 0.0, -0.1)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    scale=st.floats(0.1, 10.0),
    tx=st.floats(-1e3, 1e3),
    ty=st.floats(-1e3, 1e3),
)
def test_similarity_invariance_property(seed, scale, tx, ty):
    frames = random_skeletons(np.random.default_rng(seed), 5)
    moved = frames.copy()
    moved[..., :2] = scale * frames[..., :2] + np.array([tx, ty])
    a = normalize_tracklet(tracklet(frames)).frames
    b = normalize_tracklet(tracklet(moved)).frames
    assert np.max(np.abs(a - b)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_idempotence_property(seed):
    frames = random_skeletons(np.random.default_rng(seed), 4)
    ns = normalize_tracklet(tracklet(frames)).frames
    for f in ns:
        again = normalize_skeleton(np.concatenate([f, np.ones((17, 1))], axis=1), 1.0, 1.0)
        assert np.max(np.abs(again - f)) < 1e-9
