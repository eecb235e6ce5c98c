import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lockin_thermo.core import (
    CycleProfile,
    PixelSeries,
    RPeakSeries,
    ThermalSequence,
    EcgTrace,
    pool_3x3,
    spatial_average_3x3,
    validate_sequence,
)
from lockin_thermo.errors import InvalidSequenceError, InvalidTraceError, NeighborhoodError

from conftest import make_sequence


def test_all_ones_average_is_one():
    seq = make_sequence(np.ones((5, 3, 3)))
    s = spatial_average_3x3(seq, (1, 1))
    np.testing.assert_array_equal(s.values, np.ones(5))
    np.testing.assert_array_equal(s.times, seq.timestamps)
    assert s.pooled_pixels == 9


def test_average_of_zero_to_eight_is_four():
    seq = make_sequence(np.arange(9.0).reshape(1, 3, 3))
    assert spatial_average_3x3(seq, (1, 1)).values[0] == 4.0


@pytest.mark.parametrize("pixel", [(0, 0), (0, 2), (4, 2), (2, 0), (2, 5)])
def test_border_pixels_are_rejected(pixel):
    seq = make_sequence(np.zeros((2, 5, 6)))
    with pytest.raises(NeighborhoodError, match=str(pixel[0])):
        spatial_average_3x3(seq, pixel)


def test_validate_clean_sequence():
    seq = make_sequence(np.zeros((3, 4, 4)))
    rep = validate_sequence(seq)
    assert rep.ok
    assert rep.frame_rate == pytest.approx(30.0)
    assert rep.monotonicity_violations == []


def test_validate_reports_duplicate_timestamp():
    seq = ThermalSequence([0.0, 0.1, 0.1, 0.2], np.zeros((4, 3, 3)), check=False)
    rep = validate_sequence(seq)
    assert rep.monotonicity_violations == [1]
    assert not rep.ok


def test_validate_reports_nan_location():
    frames = np.zeros((3, 4, 5))
    frames[2, 1, 3] = np.nan
    rep = validate_sequence(ThermalSequence([0, 1, 2], frames, check=False))
    assert rep.nonfinite_count == 1
    assert rep.nonfinite == [(2, 1, 3)]


def test_sequence_invariants_enforced():
    with pytest.raises(InvalidSequenceError):
        ThermalSequence([0.0, 0.0], np.zeros((2, 3, 3)))
    with pytest.raises(InvalidSequenceError):
        ThermalSequence([0.0], np.zeros((1, 2, 3)))
    with pytest.raises(InvalidSequenceError):
        ThermalSequence([0.0, 1.0], np.zeros((3, 3, 3)))


def test_types_are_immutable():
    seq = make_sequence(np.zeros((2, 3, 3)))
    with pytest.raises(ValueError):
        seq.frames[0, 0, 0] = 1.0
    with pytest.raises(AttributeError):
        seq.timestamps = np.zeros(2)


def test_rpeak_series_flags_implausible_rr():
    peaks = RPeakSeries([0.0, 0.8, 3.5, 3.6])
    assert not peaks.plausible
    np.testing.assert_array_equal(peaks.implausible_rr, [1, 2])
    assert RPeakSeries([0.0, 0.7, 1.5]).plausible
    with pytest.raises(InvalidTraceError):
        RPeakSeries([0.0, 1.0, 1.0])


def test_ecg_trace_invariants():
    with pytest.raises(InvalidTraceError):
        EcgTrace(0.0, [0.0, 1.0])
    with pytest.raises(InvalidTraceError):
        EcgTrace(100.0, [0.0])
    with pytest.raises(InvalidTraceError):
        EcgTrace(100.0, [0.0, np.inf])
    tr = EcgTrace(100.0, np.zeros(5), start_time=2.0)
    np.testing.assert_allclose(tr.times, [2.0, 2.01, 2.02, 2.03, 2.04])


def test_pool_matches_per_pixel_average():
    rng = np.random.default_rng(1)
    seq = make_sequence(300 + rng.standard_normal((4, 6, 7)))
    m, _ = pool_3x3(seq.frames)
    for r in range(1, 5):
        for c in range(1, 6):
            np.testing.assert_allclose(m[:, r - 1, c - 1], spatial_average_3x3(seq, (r, c)).values, rtol=0, atol=1e-12)


frames_strategy = arrays(np.float64, (3, 4, 5), elements=st.floats(-1e3, 1e3, allow_nan=False))


@given(frames_strategy, frames_strategy, st.integers(1, 2), st.integers(1, 3))
def test_spatial_average_is_linear(a, b, r, c):
    sa = spatial_average_3x3(make_sequence(a), (r, c)).values
    sb = spatial_average_3x3(make_sequence(b), (r, c)).values
    sab = spatial_average_3x3(make_sequence(a + b), (r, c)).values
    np.testing.assert_allclose(sab, sa + sb, rtol=1e-12, atol=1e-9)


def test_spatial_average_reduces_noise_variance_ninefold():
    rng = np.random.default_rng(2024)
    frames = rng.standard_normal((2000, 3, 3))
    s = spatial_average_3x3(make_sequence(frames), (1, 1))
    ratio = frames[:, 1, 1].var() / s.values.var()
    assert 9 * 0.8 <= ratio <= 9 * 1.2


def test_pixel_series_pooling_bookkeeping():
    s = PixelSeries((1, 1), [0.0, 1.0], [[1.0, 3.0], [2.0, 2.0]])
    np.testing.assert_array_equal(s.values, [2.0, 2.0])
    assert s.pooled_pixels == 2
    raw = PixelSeries((1, 1), [0.0, 1.0], [5.0, 6.0])
    assert raw.pooled_pixels == 1


def test_cycle_profile_empty_flag():
    p = CycleProfile(np.array([0.25, 0.75]), np.array([1.0, np.nan]), np.array([0.0, np.nan]),
                     np.array([0.0, np.nan]), np.array([3, 0]), 1.0, 0.0, 3)
    np.testing.assert_array_equal(p.empty, [False, True])
