"""Per-pixel amplitude and phase at the cardiac frequency.

Samples are taken on the warped timeline, which is generally nonuniform, so
the single-frequency component is obtained by least squares on
``offset + a*cos(2*pi*f*t) + b*sin(2*pi*f*t)`` rather than an FFT bin.
Phase follows the ``amplitude * cos(2*pi*f*t + phase)`` convention with
``t = 0`` at the first R-peak.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PixelSeries, RPeakSeries, ThermalSequence, pool_3x3
from .ecg import mean_rr
from .errors import SpanTooShortError
from .timewarp import TimeWarp, warp_time

MIN_CYCLES = 4


@dataclass(frozen=True, eq=False)
class SpectralMap:
    """Index ``[i, j]`` corresponds to frame pixel ``(i + 1, j + 1)``."""

    amplitude: np.ndarray
    phase: np.ndarray
    valid: np.ndarray
    cardiac_frequency: float


def cardiac_frequency(peaks: RPeakSeries) -> float:
    return 1.0 / mean_rr(peaks)


def _design(t_warped, f):
    theta = 2 * np.pi * f * t_warped
    return np.column_stack([np.ones_like(theta), np.cos(theta), np.sin(theta)])


def _check_span(t_warped, f):
    cycles = (t_warped[-1] - t_warped[0]) * f if t_warped.size > 1 else 0.0
    if cycles < MIN_CYCLES - 1e-9:
        raise SpanTooShortError(
            f"samples span {cycles:.3g} cycle(s) at {f:g} Hz; at least {MIN_CYCLES} required"
        )


def _amp_phase(coef):
    a, b = coef[1], coef[2]
    return np.hypot(a, b), np.arctan2(-b, a)


def _in_domain(times, warp, start, end):
    keep = warp.contains(times)
    if start is not None:
        keep &= times >= start
    if end is not None:
        keep &= times < end
    return np.flatnonzero(keep)


def pixel_amplitude_at(series: PixelSeries, warp: TimeWarp, f, start=None, end=None):
    """Amplitude and phase of ``series`` at frequency ``f`` on the warped timeline.

    Only samples inside the R-peak span (and ``[start, end)`` when given) are
    used; they must cover at least four cycles of ``f``.
    """
    idx = _in_domain(series.times, warp, start, end)
    tw = np.asarray(warp_time(warp, series.times[idx]), dtype=np.float64)
    _check_span(tw, f)
    coef, *_ = np.linalg.lstsq(_design(tw, f), series.values[idx], rcond=None)
    amp, phase = _amp_phase(coef)
    return float(amp), float(phase)


def artery_map(seq: ThermalSequence, warp: TimeWarp, f=None, start=None, end=None) -> SpectralMap:
    """Cardiac-frequency amplitude and phase of every interior pixel (3x3 pooled).

    ``f`` defaults to ``1 / warp.t_rr``. ``start``/``end`` restrict the
    analysis to a time range, for tracking over time.
    """
    f = 1.0 / warp.t_rr if f is None else float(f)
    idx = _in_domain(seq.timestamps, warp, start, end)
    tw = np.asarray(warp_time(warp, seq.timestamps[idx]), dtype=np.float64)
    _check_span(tw, f)
    frames = np.asarray(seq.frames[idx], dtype=np.float64)
    m, _ = pool_3x3(frames, frames[:, 1:-1, 1:-1].mean(axis=0))
    n, h, w = m.shape
    y = m.reshape(n, h * w)
    valid = np.all(np.isfinite(y), axis=0)
    coef, *_ = np.linalg.lstsq(_design(tw, f), np.where(valid, y, 0.0), rcond=None)
    amp, phase = _amp_phase(coef)
    amp = np.where(valid, amp, np.nan).reshape(h, w)
    phase = np.where(valid & (amp.reshape(-1) > 0), phase, np.nan).reshape(h, w)
    return SpectralMap(amp, phase, valid.reshape(h, w), f)


def top_pixels(amplitude, count):
    """Boolean mask of the ``count`` largest finite amplitudes (ties by index order)."""
    a = np.where(np.isfinite(amplitude), amplitude, -np.inf).reshape(-1)
    order = np.argsort(-a, kind="stable")[:count]
    out = np.zeros(a.size, dtype=bool)
    out[order] = True
    return out.reshape(np.shape(amplitude))


def iou(a, b) -> float:
    a, b = np.asarray(a, bool), np.asarray(b, bool)
    union = np.count_nonzero(a | b)
    return float(np.count_nonzero(a & b) / union) if union else 1.0


def circular_mean(phases) -> float:
    p = np.asarray(phases, dtype=np.float64)
    p = p[np.isfinite(p)]
    return float(np.angle(np.mean(np.exp(1j * p))))


def phase_difference(a, b) -> float:
    """``a - b`` wrapped to [0, 2*pi)."""
    return float(np.mod(a - b, 2 * np.pi))
