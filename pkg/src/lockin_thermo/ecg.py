"""R-peak detection with a combined adaptive threshold.

The detector follows the structure of Christov's real-time QRS detector
(BioMedical Engineering OnLine 3:28, 2004):

1. two moving-average filters, one spanning a power-line period and one
   suppressing EMG noise;
2. a "complex lead": the absolute derivative of the filtered signal,
   smoothed again;
3. a threshold ``M + F + R`` built from a steep-slope term ``M`` (refreshed
   after every beat, then decaying), a shape term ``F`` (tracking recent
   high-frequency activity) and an expected-beat term ``R`` (lowering the
   threshold as the next beat becomes due);
4. a refractory period after each detection.

Each detection is then placed on the largest raw ECG sample near the
threshold crossing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d, uniform_filter1d

from .core import RR_PLAUSIBLE, EcgTrace, RPeakSeries
from .errors import (
    InsufficientPeaksError,
    InvalidConfigError,
    SampleRateError,
    TraceTooShortError,
)

log = logging.getLogger(__name__)

MIN_SAMPLE_RATE = 100.0
MIN_DURATION = 2.0


@dataclass(frozen=True)
class DetectorConfig:
    powerline_ma_window: float = 0.02
    emg_ma_window: float = 0.028
    lead_ma_window: float = 0.04
    refractory: float = 0.2
    # fraction of M lost per second between 200 ms and 1200 ms after a beat
    steep_slope_decay: float = 0.4
    steep_slope_fraction: float = 0.6
    shape_gain: float = 0.5
    refine_window: float = 0.04
    min_rr_for_plausibility: float = RR_PLAUSIBLE[0]
    max_rr: float = RR_PLAUSIBLE[1]

    def __post_init__(self):
        problems = []
        for name in ("powerline_ma_window", "emg_ma_window", "lead_ma_window",
                     "refractory", "refine_window"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0")
        if not 0 <= self.steep_slope_decay < 1:
            problems.append("steep_slope_decay must be in [0, 1)")
        if not self.min_rr_for_plausibility < self.max_rr:
            problems.append("min_rr_for_plausibility must be below max_rr")
        if problems:
            raise InvalidConfigError(problems)


def _ma(x, seconds, fs):
    n = max(1, int(round(seconds * fs)))
    return uniform_filter1d(x, n, mode="nearest")


def complex_lead(samples, fs, cfg: DetectorConfig):
    """Filtered, rectified derivative the thresholds operate on."""
    x = _ma(np.asarray(samples, dtype=np.float64), cfg.powerline_ma_window, fs)
    x = _ma(x, cfg.emg_ma_window, fs)
    y = np.abs(np.gradient(x)) * fs
    return _ma(y, cfg.lead_ma_window, fs)


def _threshold_crossings(y, fs, cfg: DetectorConfig):
    n = y.size
    refractory = max(1, int(round(cfg.refractory * fs)))
    decay_start = refractory
    decay_end = int(round(1.2 * fs))
    decay_len = max(1, decay_end - decay_start)
    frac = cfg.steep_slope_fraction

    # shape term: running mean over 300 ms of the 50 ms running maximum
    w50 = max(1, int(round(0.05 * fs)))
    w300 = max(1, int(round(0.3 * fs)))
    rmax = maximum_filter1d(y, w50, origin=(w50 - 1) // 2, mode="nearest")
    csum = np.concatenate(([0.0], np.cumsum(rmax)))
    idx = np.arange(n)
    lo = np.maximum(0, idx - w300 + 1)
    f_term = cfg.shape_gain * (csum[idx + 1] - csum[lo]) / (idx + 1 - lo)

    m_buf = [frac * float(np.max(y[: int(5 * fs)]))] * 5
    m = m_ref = float(np.mean(m_buf))
    rr_buf = []
    r_term = 0.0
    r_slope = 0.0
    last = None
    crossings = []
    for i in range(n):
        if last is not None:
            since = i - last
            if since < decay_start:
                continue
            if since < decay_end:
                m = m_ref * (1.0 - cfg.steep_slope_decay * (since - decay_start) / decay_len)
            if rr_buf:
                rm = float(np.mean(rr_buf))
                if 2.0 * rm / 3.0 <= since < rm:
                    r_term -= r_slope
        thr = m + f_term[i] + r_term
        if y[i] > thr and thr > 0:
            if last is not None:
                rr_buf = (rr_buf + [i - last])[-5:]
            last = i
            crossings.append(i)
            new_m = frac * float(np.max(y[i:i + refractory]))
            if new_m > 1.5 * m_buf[-1]:
                new_m = 1.1 * m_buf[-1]
            m_buf = m_buf[1:] + [new_m]
            m = m_ref = float(np.mean(m_buf))
            # expected-beat term falls 1.4x slower than the steep-slope term
            r_slope = m_ref * cfg.steep_slope_decay / decay_len / 1.4
            r_term = 0.0
    return np.asarray(crossings, dtype=int)


def detect_rpeaks(ecg: EcgTrace, cfg: DetectorConfig | None = None) -> RPeakSeries:
    """Detect R-peaks in a single-lead ECG.

    Parameters
    ----------
    ecg : EcgTrace
        Trace of at least 2 s sampled at 100 Hz or more.
    cfg : DetectorConfig, optional
        Filter windows and threshold constants.

    Returns
    -------
    RPeakSeries
        Peak times on the trace's clock (``start_time`` applied). No two peaks
        are closer than ``cfg.refractory``.
    """
    cfg = cfg or DetectorConfig()
    fs = ecg.sample_rate
    if fs < MIN_SAMPLE_RATE:
        raise SampleRateError(
            f"sample rate {fs:g} Hz is below {MIN_SAMPLE_RATE:g} Hz; "
            "10 ms R-peak timing needs at least 100 Hz"
        )
    if ecg.duration < MIN_DURATION:
        raise TraceTooShortError(
            f"trace lasts {ecg.duration:g} s; the adaptive threshold needs "
            f"at least {MIN_DURATION:g} s to warm up"
        )
    raw = ecg.samples
    y = complex_lead(raw, fs, cfg)
    if not np.max(y) > 0:
        return RPeakSeries(np.empty(0))

    half = max(1, int(round(cfg.refine_window * fs)))
    peaks = []
    for i in _threshold_crossings(y, fs, cfg):
        a, b = max(0, i - half), min(raw.size, i + half + 1)
        peaks.append(a + int(np.argmax(raw[a:b])))

    refractory = cfg.refractory * fs
    kept = []
    for p in sorted(set(peaks)):
        if kept and p - kept[-1] < refractory:
            if raw[p] > raw[kept[-1]]:
                kept[-1] = p
            continue
        kept.append(p)
    series = RPeakSeries(ecg.start_time + np.asarray(kept, dtype=np.float64) / fs)
    rr = np.diff(series.peak_times)
    odd = np.flatnonzero((rr < cfg.min_rr_for_plausibility) | (rr > cfg.max_rr))
    if odd.size:
        log.warning("%d RR interval(s) outside [%g, %g] s", odd.size,
                    cfg.min_rr_for_plausibility, cfg.max_rr)
    return series


def rr_intervals(peaks: RPeakSeries) -> np.ndarray:
    t = peaks.peak_times
    if t.size < 2:
        raise InsufficientPeaksError(f"need at least 2 R-peaks, got {t.size}")
    return np.diff(t)


def mean_rr(peaks: RPeakSeries) -> float:
    """Mean RR interval, ``(last - first) / (count - 1)``."""
    t = peaks.peak_times
    if t.size < 2:
        raise InsufficientPeaksError(f"need at least 2 R-peaks, got {t.size}")
    return float((t[-1] - t[0]) / (t.size - 1))


def match_peaks(detected, truth, tolerance=0.05):
    """Greedy one-to-one matching of detected to true peak times.

    Returns ``(true_positives, false_positives, false_negatives, errors)`` where
    ``errors`` holds ``detected - truth`` for every matched pair.
    """
    detected = np.asarray(detected, dtype=float)
    truth = np.asarray(truth, dtype=float)
    used = np.zeros(detected.size, dtype=bool)
    errors = []
    for t in truth:
        if detected.size == 0:
            break
        d = np.abs(detected - t)
        d[used] = np.inf
        j = int(np.argmin(d))
        if d[j] <= tolerance:
            used[j] = True
            errors.append(detected[j] - t)
    tp = len(errors)
    return tp, int(detected.size - tp), int(truth.size - tp), np.asarray(errors)
