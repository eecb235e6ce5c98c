"""Phase-binned synchronous averaging over sliding lock-in windows.

A window ``[start, start + window]`` on the original timeline contributes
every cardiac cycle whose two bounding R-peaks fall inside it. Samples of
those cycles are warped onto the periodic timeline and assigned to
``phase_bins`` equal bins of ``[0, t_rr)``; the bin means form the locked
cycle profile.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import CycleProfile, LockInMap, PixelSeries, ThermalSequence, pool_3x3
from .errors import (
    DegenerateWindowError,
    InvalidConfigError,
    SequenceTooShortError,
    WindowUnderpopulatedError,
)
from .timewarp import TimeWarp, phase_of

log = logging.getLogger(__name__)

AUTO = "auto"
# tolerance for window edges and bin boundaries landing on exact multiples
_EPS = 1e-9


@dataclass(frozen=True)
class LockInConfig:
    window: float = 15.0
    slide: float = 1.0
    phase_bins: object = AUTO  # int >= 4, or "auto": round(t_rr * frame rate)
    min_cycles: int = 4

    def __post_init__(self):
        problems = []
        if not self.window > 0:
            problems.append(f"window must be > 0 (got {self.window})")
        if not self.slide > 0:
            problems.append(f"slide must be > 0 (got {self.slide})")
        if isinstance(self.phase_bins, str):
            if self.phase_bins.lower() != AUTO:
                problems.append(f"phase_bins must be an integer or 'auto' (got {self.phase_bins!r})")
        elif int(self.phase_bins) != self.phase_bins or self.phase_bins < 4:
            problems.append(f"phase_bins must be >= 4 (got {self.phase_bins})")
        if int(self.min_cycles) < 1:
            problems.append(f"min_cycles must be >= 1 (got {self.min_cycles})")
        if problems:
            raise InvalidConfigError(problems)

    def resolve_bins(self, t_rr, frame_rate) -> int:
        if isinstance(self.phase_bins, str):
            return max(4, int(round(t_rr * frame_rate)))
        return int(self.phase_bins)


@dataclass(frozen=True, eq=False)
class BinnedSamples:
    """Readings of one window grouped by phase bin.

    ``bins[b]`` has shape ``(frames_in_bin, pooled_pixels)``.
    """

    bins: list
    t_rr: float
    window_start: float
    n_cycles: int
    pooled_pixels: int

    @property
    def phase_bins(self) -> int:
        return len(self.bins)

    @property
    def counts(self) -> np.ndarray:
        return np.array([b.shape[0] for b in self.bins], dtype=np.int64)

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.phase_bins) + 0.5) * self.t_rr / self.phase_bins


@dataclass(frozen=True, eq=False)
class WindowResult:
    window_start: float
    profile: CycleProfile


@dataclass(eq=False)
class SlidingResult:
    """Populated windows in order, plus ``(window_start, cycles_found)`` for skipped ones."""

    windows: list
    skipped: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.windows)

    def __len__(self):
        return len(self.windows)

    def __getitem__(self, i):
        return self.windows[i]


def _frame_rate(times):
    d = np.diff(times)
    return float(1.0 / np.median(d)) if d.size else float("nan")


def window_cycles(warp: TimeWarp, window_start, window):
    """Indices ``(a, b)`` of the first and last R-peak inside the window and the cycle count."""
    p = warp.breakpoints_in
    inside = np.flatnonzero((p >= window_start - _EPS) & (p <= window_start + window + _EPS))
    if inside.size < 2:
        return None, None, 0
    return int(inside[0]), int(inside[-1]), int(inside.size - 1)


def assign_bins(times, warp: TimeWarp, window_start, cfg: LockInConfig, frame_rate=None):
    """Select the samples of complete cycles in a window and give each a phase bin.

    Returns ``(sample_indices, bin_indices, n_cycles, phase_bins)``.
    """
    times = np.asarray(times, dtype=np.float64)
    a, b, n_cycles = window_cycles(warp, window_start, cfg.window)
    if n_cycles < cfg.min_cycles:
        raise WindowUnderpopulatedError(n_cycles, int(cfg.min_cycles), window_start)
    frame_rate = _frame_rate(times) if frame_rate is None else frame_rate
    n_bins = cfg.resolve_bins(warp.t_rr, frame_rate)
    lo, hi = warp.breakpoints_in[a], warp.breakpoints_in[b]
    idx = np.flatnonzero((times >= lo) & (times < hi))
    if idx.size == 0:
        return idx, idx, n_cycles, n_bins
    _, phase = phase_of(warp, times[idx])
    bins = np.floor(np.asarray(phase) / warp.t_rr * n_bins + _EPS).astype(np.int64)
    return idx, np.clip(bins, 0, n_bins - 1), n_cycles, n_bins


def bin_cycles(series: PixelSeries, warp: TimeWarp, window_start, cfg: LockInConfig | None = None) -> BinnedSamples:
    """Group a window's samples by cardiac phase.

    Only cycles whose bounding R-peaks both lie in
    ``[window_start, window_start + cfg.window]`` contribute; a sample at an
    R-peak has phase 0 and lands in bin 0.
    """
    cfg = cfg or LockInConfig()
    idx, bins, n_cycles, n_bins = assign_bins(series.times, warp, window_start, cfg)
    readings = series.samples[idx]
    grouped = [readings[bins == k] for k in range(n_bins)]
    return BinnedSamples(grouped, warp.t_rr, float(window_start), n_cycles, series.pooled_pixels)


def standard_error(binned: BinnedSamples, pooled_pixels=None):
    """Population SD and standard error per bin.

    ``sd`` is taken over every reading in the bin (divisor = number of
    readings); ``se = sd / sqrt(frames_in_bin * pooled_pixels)``. Empty bins
    yield NaN.
    """
    pooled = binned.pooled_pixels if pooled_pixels is None else int(pooled_pixels)
    counts = binned.counts
    sd = np.full(binned.phase_bins, np.nan)
    for k, readings in enumerate(binned.bins):
        if readings.size:
            sd[k] = np.std(readings)
    with np.errstate(invalid="ignore", divide="ignore"):
        se = sd / np.sqrt(counts * pooled)
    se[counts == 0] = np.nan
    return sd, se


def synchronous_average(binned: BinnedSamples, pooled_pixels=None) -> CycleProfile:
    """Mean of each phase bin across the window's cycles, with SD and SE."""
    counts = binned.counts
    if not np.any(counts):
        raise DegenerateWindowError(
            f"every phase bin is empty in the window starting at {binned.window_start:g} s"
        )
    mean = np.full(binned.phase_bins, np.nan)
    for k, readings in enumerate(binned.bins):
        if readings.size:
            mean[k] = readings.mean()
    sd, se = standard_error(binned, pooled_pixels)
    pooled = binned.pooled_pixels if pooled_pixels is None else int(pooled_pixels)
    return CycleProfile(
        phase_bin_centers=binned.centers,
        mean=mean,
        sd=sd,
        se=se,
        sample_count=counts,
        t_rr=binned.t_rr,
        window_start=binned.window_start,
        n_cycles=binned.n_cycles,
        pooled_pixels=pooled,
    )


def window_starts(t0, duration, cfg: LockInConfig):
    if duration < cfg.window - _EPS:
        raise SequenceTooShortError(
            f"data span {duration:g} s is shorter than the {cfg.window:g} s lock-in window "
            f"(short by {cfg.window - duration:g} s)"
        )
    n = int(np.floor((duration - cfg.window) / cfg.slide + _EPS)) + 1
    return [float(t0 + k * cfg.slide) for k in range(n)]


def sliding_lockin(series: PixelSeries, warp: TimeWarp, cfg: LockInConfig | None = None) -> SlidingResult:
    """Lock-in profiles for windows stepped by ``cfg.slide`` from the start of the series.

    Windows with fewer than ``cfg.min_cycles`` complete cycles are skipped and
    listed in ``result.skipped``.
    """
    cfg = cfg or LockInConfig()
    out = SlidingResult([])
    for ws in window_starts(series.times[0], series.duration, cfg):
        try:
            profile = synchronous_average(bin_cycles(series, warp, ws, cfg))
        except WindowUnderpopulatedError as exc:
            log.warning("skipping window: %s", exc)
            out.skipped.append((ws, exc.found))
            continue
        out.windows.append(WindowResult(ws, profile))
    return out


def fundamental(means, centers, t_rr):
    """Amplitude and phase of the first harmonic of binned cycle means.

    Operates on the last axis of ``means`` (NaN marks empty bins). Phase is
    that of ``cos(2*pi*t/t_rr + phase)``, so 0 means a maximum at the R-peak.
    """
    means = np.asarray(means, dtype=np.float64)
    ok = np.isfinite(means)
    n = ok.sum(axis=-1)
    centered = np.where(ok, means - np.nanmean(np.where(ok, means, np.nan), axis=-1, keepdims=True), 0.0)
    z = np.exp(-2j * np.pi * np.asarray(centers) / t_rr)
    c = (centered * z).sum(axis=-1)
    amp = 2.0 * np.abs(c) / n
    return amp, np.angle(c)


def _wrap_phase(phase):
    # (-pi, pi]
    return np.where(phase <= -np.pi, phase + 2 * np.pi, phase)


def lockin_map(seq: ThermalSequence, warp: TimeWarp, window_start, cfg: LockInConfig | None = None) -> LockInMap:
    """Lock-in profile summary for every interior pixel of one window.

    Each pixel uses its 3x3-pooled series. ``amplitude`` is half the
    peak-to-peak of the bin means, ``fundamental`` the first-harmonic
    amplitude, ``phase`` the first-harmonic phase relative to the R-peak, and
    ``se_mean`` the mean standard error over non-empty bins. Pixels with
    non-finite readings are marked invalid.
    """
    cfg = cfg or LockInConfig()
    idx, bins, n_cycles, n_bins = assign_bins(seq.timestamps, warp, window_start, cfg)
    counts = np.bincount(bins, minlength=n_bins)
    if idx.size == 0:
        raise DegenerateWindowError(f"every phase bin is empty in the window starting at {window_start:g} s")
    frames = np.asarray(seq.frames[idx], dtype=np.float64)
    offset = frames[:, 1:-1, 1:-1].mean(axis=0)
    m, q = pool_3x3(frames, offset)
    shape = m.shape[1:]
    sums = np.zeros((n_bins,) + shape)
    sums_sq = np.zeros_like(sums)
    for k in range(n_bins):
        sel = bins == k
        if counts[k]:
            sums[k] = m[sel].sum(axis=0)
            sums_sq[k] = q[sel].sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cnt = counts[:, None, None].astype(np.float64)
        mean = np.where(cnt > 0, sums / cnt, np.nan)
        var = np.clip(np.where(cnt > 0, sums_sq / cnt, np.nan) - mean * mean, 0.0, None)
        se = np.sqrt(var) / np.sqrt(cnt * 9.0)
    amplitude = (np.nanmax(mean, axis=0) - np.nanmin(mean, axis=0)) / 2.0
    centers = (np.arange(n_bins) + 0.5) * warp.t_rr / n_bins
    fund, phase = fundamental(np.moveaxis(mean, 0, -1), centers, warp.t_rr)
    se_mean = np.nanmean(se, axis=0)
    valid = np.all(np.isfinite(frames[:, :, :]), axis=0)
    valid = valid[:-2, :-2] & valid[1:-1, 1:-1] & valid[2:, 2:] & valid[:-2, 2:] & valid[2:, :-2] \
        & valid[1:-1, :-2] & valid[1:-1, 2:] & valid[:-2, 1:-1] & valid[2:, 1:-1]
    phase = np.where((amplitude > 0) & (fund > 0) & valid, _wrap_phase(phase), np.nan)
    amplitude = np.where(valid, amplitude, np.nan)
    fund = np.where(valid, fund, np.nan)
    se_mean = np.where(valid, se_mean, np.nan)
    return LockInMap(amplitude, phase, se_mean, valid, fund, warp.t_rr, float(window_start), n_cycles)


def sliding_lockin_map(seq: ThermalSequence, warp: TimeWarp, cfg: LockInConfig | None = None):
    """:func:`lockin_map` for every sliding window; skipped windows are logged."""
    cfg = cfg or LockInConfig()
    maps = []
    for ws in window_starts(seq.timestamps[0], seq.duration, cfg):
        try:
            maps.append(lockin_map(seq, warp, ws, cfg))
        except WindowUnderpopulatedError as exc:
            log.warning("skipping window: %s", exc)
    return maps
