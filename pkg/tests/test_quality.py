from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitpipe.errors import TooShort
from gaitpipe.quality import (
    FilterConfig, Reason, exact_mean, feet_visibility_ok, filter_tracklets, leg_velocity, length_ok,
    longest_run, mean_confidence_ok, run_filters, walking_ok,
)
from gaitpipe.skeleton import NormalizedSequence
from gaitpipe.synth import generate_synthetic_walkers
from helpers import pose, tracklet, walking_frames
from oracles import leg_velocity_loop

CFG = FilterConfig()


def unit_pose_tracklet(n: int, leg_step: float, conf: float = 0.9):
    """Pelvis at the origin, shoulder width 1, trunk 1: normalized x equals pixel x.

    Knees and ankles alternate between x and x + leg_step, so every
    per-frame leg displacement is exactly ``leg_step``.
    """
    base = np.zeros((17, 3))
    base[:, 2] = conf
    base[5, :2] = (0.5, -1.0)
    base[6, :2] = (-0.5, -1.0)
    base[11, :2] = (0.25, 0.0)
    base[12, :2] = (-0.25, 0.0)
    for j, x in ((13, 0.25), (14, -0.25), (15, 0.25), (16, -0.25)):
        base[j, :2] = (x, 1.0 if j < 15 else 2.0)
    frames = np.stack([base] * n)
    frames[1::2, 13:17, 0] += leg_step
    return tracklet(frames)


# ---- the eight boundary fixtures ----------------------------------------------------------

BOUNDARY_CASES = {
    "confidence exactly 0.60 rejects": (lambda: tracklet(walking_frames(60, conf=0.60)), Reason.LOW_CONFIDENCE),
    "confidence 0.61 passes": (lambda: tracklet(walking_frames(60, conf=0.61)), Reason.PASS),
    "3 low-feet frames pass": (lambda: _feet_gap(3), Reason.PASS),
    "4 low-feet frames reject": (lambda: _feet_gap(4), Reason.FEET_OCCLUSION),
    "length 53 rejects": (lambda: tracklet(walking_frames(53)), Reason.TOO_SHORT),
    "length 54 passes": (lambda: tracklet(walking_frames(54)), Reason.PASS),
    "leg velocity exactly 0.01 passes": (lambda: unit_pose_tracklet(60, 0.01), Reason.PASS),
    "leg velocity 0.0099 rejects": (lambda: unit_pose_tracklet(60, 0.0099), Reason.NOT_WALKING),
}


def _feet_gap(run: int):
    frames = walking_frames(60)
    frames[20:20 + run, 15:17, 2] = 0.2
    return tracklet(frames)


@pytest.mark.parametrize("name", list(BOUNDARY_CASES))
def test_boundary_fixture(name):
    make, reason = BOUNDARY_CASES[name]
    assert run_filters(make()).reason is reason


# ---- individual predicates ----------------------------------------------------------------

@pytest.mark.parametrize("conf, ok", [(0.7, True), (0.5, False), (0.60, False)])
def test_mean_confidence(conf, ok):
    assert mean_confidence_ok(tracklet(walking_frames(10, conf=conf)), CFG) is ok


@pytest.mark.parametrize("run, ok", [(0, True), (3, True), (4, False)])
def test_feet_visibility(run, ok):
    assert feet_visibility_ok(_feet_gap(run), CFG) is ok


def test_feet_uses_mean_of_both_ankles():
    frames = walking_frames(60)
    frames[10:20, 15, 2] = 0.2  # one ankle low, the other 0.9: mean 0.55 stays above 0.5
    assert feet_visibility_ok(tracklet(frames), CFG)


@pytest.mark.parametrize("n, ok", [(54, True), (53, False), (900, True), (901, False)])
def test_length(n, ok):
    class _Len:
        def __len__(self):
            return n
    assert length_ok(_Len(), CFG) is ok


def test_length_10000_rejected():
    assert run_filters(tracklet(walking_frames(10000))).reason is Reason.TOO_LONG


def test_longest_run():
    assert longest_run([0, 1, 1, 0, 1, 1, 1, 0]) == 3
    assert longest_run([]) == 0


def _seq(frames):
    return NormalizedSequence(np.asarray(frames, dtype=np.float64))


def test_leg_velocity_examples():
    static = np.zeros((10, 17, 2))
    assert leg_velocity(_seq(static)) == 0.0
    moving = static.copy()
    moving[:, 13:17, 0] = 0.02 * np.arange(10)[:, None]
    assert leg_velocity(_seq(moving)) == pytest.approx(0.02, abs=1e-15)
    one = static.copy()
    one[:, 15, 0] = 0.04 * np.arange(10)
    assert leg_velocity(_seq(one)) == pytest.approx(0.01, abs=1e-15)
    with pytest.raises(TooShort):
        leg_velocity(_seq(static[:1]))


def test_walking_ok_threshold_is_inclusive():
    frames = np.zeros((9, 17, 2))
    frames[1::2, 13:17, 0] = 0.01
    assert leg_velocity(_seq(frames)) == 0.01
    assert walking_ok(_seq(frames), CFG)
    frames[1::2, 13:17, 0] = 0.005
    assert not walking_ok(_seq(frames), CFG)


def test_leg_velocity_matches_loop_oracle():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(30, 17, 2))
    assert leg_velocity(_seq(x)) == pytest.approx(leg_velocity_loop(x.tolist()), rel=1e-12)


def test_exact_mean_of_constants():
    for n in (29, 57, 212, 1000):
        assert exact_mean(np.full(n, 0.01)) == 0.01
        assert exact_mean(np.full(n, 0.6)) == 0.6


def test_ordering_short_track_never_checks_confidence():
    v = run_filters(tracklet(walking_frames(40, conf=0.1)))
    assert v.reason is Reason.TOO_SHORT


def test_standing_person_not_walking():
    v = run_filters(tracklet(np.stack([pose(conf=0.95)] * 80)))
    assert v.reason is Reason.NOT_WALKING and v.leg_velocity == 0.0


def test_degenerate_reason():
    frames = walking_frames(60)
    frames[:, :, :2] = 0.0
    assert run_filters(tracklet(frames)).reason is Reason.DEGENERATE


def test_synthetic_walkers_all_pass():
    walkers = generate_synthetic_walkers(32, 4, 108, seed=7)
    admitted, report = filter_tracklets(walkers)
    assert len(admitted) == 128
    assert report.counts["Pass"] == 128


def test_report_counts_partition_inputs():
    ts = [tracklet(walking_frames(60), 0), tracklet(walking_frames(20), 1),
          tracklet(walking_frames(60, conf=0.3), 2), tracklet(np.stack([pose()] * 60), 3)]
    admitted, report = filter_tracklets(ts)
    assert sum(report.counts.values()) == len(ts) == len(report.verdicts)
    assert report.admitted == [0] and [t.track_id for t in admitted] == [0]
    again = filter_tracklets(ts)[1]
    assert again.verdicts == report.verdicts


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**16), lo=st.floats(0.05, 0.95), hi=st.floats(0.05, 0.95))
def test_raising_confidence_threshold_is_monotone(seed, lo, hi):
    lo, hi = min(lo, hi), max(lo, hi)
    rng = np.random.default_rng(seed)
    frames = walking_frames(60, conf=0.5)
    frames[..., 2] = rng.uniform(0.3, 1.0, size=frames.shape[:2])
    t = tracklet(frames)
    strict = run_filters(t, FilterConfig(min_mean_conf=hi)).passed
    loose = run_filters(t, FilterConfig(min_mean_conf=lo)).passed
    assert loose or not strict


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**16), dx=st.floats(-5, 5), dy=st.floats(-5, 5))
def test_leg_velocity_translation_invariant(seed, dx, dy):
    x = np.random.default_rng(seed).normal(size=(12, 17, 2))
    a = leg_velocity(_seq(x))
    b = leg_velocity(_seq(x + np.array([dx, dy])))
    assert a >= 0.0
    assert b == pytest.approx(a, rel=1e-9, abs=1e-12)
