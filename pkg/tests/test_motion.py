import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lockin_thermo.errors import SequenceTooShortError
from lockin_thermo.motion import motion_cost, motion_score, segment_frames, select_low_motion_segment
from lockin_thermo.synth import SynthConfig, synth_dataset

from conftest import make_sequence


def textured(rng, h=24, w=24):
    from scipy.ndimage import gaussian_filter
    return 300 + gaussian_filter(rng.standard_normal((h, w)), 1.0, mode="wrap")


def test_identical_frames():
    img = textured(np.random.default_rng(0))
    scores, shifts = motion_score(make_sequence(np.stack([img, img, img])))
    np.testing.assert_array_equal(scores, 0.0)
    np.testing.assert_array_equal(shifts, 0)


def test_unit_translation():
    img = textured(np.random.default_rng(1))
    scores, shifts = motion_score(make_sequence(np.stack([img, np.roll(img, (1, 0), axis=(0, 1))])))
    assert tuple(shifts[0]) == (1, 0)
    assert scores[0] == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(-3, 3), st.integers(-3, 3), st.integers(0, 2**31))
def test_reports_exact_translation(dr, dc, seed):
    img = textured(np.random.default_rng(seed))
    _, shifts = motion_score(make_sequence(np.stack([img, np.roll(img, (dr, dc), axis=(0, 1))])))
    assert tuple(shifts[0]) == (dr, dc)


def test_noise_frames_report_no_shift():
    rng = np.random.default_rng(3)
    zero = 0
    for _ in range(100):
        _, shifts = motion_score(make_sequence(300 + 0.03 * rng.standard_normal((2, 32, 32))))
        zero += not shifts[0].any()
    assert zero >= 90


def test_static_scene_selects_start():
    seq = make_sequence(np.full((60 * 30, 12, 12), 300.0))
    start, end = select_low_motion_segment(seq, 30.0)
    assert start == 0.0
    assert end - start == pytest.approx(30.0, abs=1 / 30)


def test_full_length_returns_full_span():
    cfg = SynthConfig(duration=10, width=16, height=16, texture_sd=0.5, seed=1)
    _, seq, _ = synth_dataset(cfg)
    start, end = select_low_motion_segment(seq, seq.duration)
    assert start == seq.timestamps[0]
    assert end == pytest.approx(seq.timestamps[-1] + seq.frame_interval)
    with pytest.raises(SequenceTooShortError):
        select_low_motion_segment(seq, seq.duration + 1)


def test_injected_shift_is_avoided():
    cfg = SynthConfig(duration=60, width=32, height=32, texture_sd=0.5, motion_events=((20.0, (2, 0)),), seed=0)
    _, seq, _ = synth_dataset(cfg)
    start, end = select_low_motion_segment(seq, 30.0)
    assert end - start == pytest.approx(30.0, abs=seq.frame_interval)
    seg = segment_frames(seq, start, end)
    t = seg.timestamps
    # no consecutive pair inside the span straddles the event
    assert not np.any((t[:-1] < 20.0) & (t[1:] >= 20.0))


def test_cost_gates_residual_noise():
    scores = np.array([1.0, 1.1, 0.9, 1.0, 10.0])
    shifts = np.array([[0, 0], [0, 0], [0, 0], [0, 0], [0, 0]])
    np.testing.assert_allclose(motion_cost(scores, shifts), [0, 0, 0, 0, 7.0])
    shifts[1] = (3, 4)
    assert motion_cost(scores, shifts)[1] == pytest.approx(5.0)


def test_too_small_frames():
    with pytest.raises(SequenceTooShortError):
        motion_score(make_sequence(np.zeros((2, 5, 5))))
