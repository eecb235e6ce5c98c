"""Data model shared by every pipeline stage.

Arrays held by the types below are made read-only on construction, so
instances can be passed between workers without copying or locking.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass, field

import numpy as np

from .errors import (
    InvalidSequenceError,
    InvalidTraceError,
    NeighborhoodError,
)

#: RR intervals outside this range raise the plausibility flag (not an error).
RR_PLAUSIBLE = (0.3, 2.0)


def _frozen(a, dtype=None):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ValidationReport:
    monotonicity_violations: list  # index k where timestamps[k+1] <= timestamps[k]
    nonfinite: list  # (frame, row, col)
    frame_rate: float
    shape_problems: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.monotonicity_violations or self.nonfinite or self.shape_problems)

    @property
    def nonfinite_count(self) -> int:
        return len(self.nonfinite)


def _inspect(timestamps, frames) -> ValidationReport:
    shape_problems = []
    if frames.ndim != 3:
        shape_problems.append(f"frames must be 3-D (F, height, width), got ndim={frames.ndim}")
    else:
        if frames.shape[0] != timestamps.shape[0]:
            shape_problems.append(
                f"{timestamps.shape[0]} timestamps for {frames.shape[0]} frames"
            )
        if frames.shape[0] < 1:
            shape_problems.append("at least one frame required")
        if frames.shape[1] < 3 or frames.shape[2] < 3:
            shape_problems.append(
                f"frames must be at least 3x3, got {frames.shape[1]}x{frames.shape[2]}"
            )
    d = np.diff(timestamps)
    violations = [int(k) for k in np.flatnonzero(~(d > 0))]
    bad = np.argwhere(~np.isfinite(frames)) if frames.ndim == 3 else np.empty((0, 3), int)
    nonfinite = [tuple(int(v) for v in idx) for idx in bad]
    nonfinite += [(int(k), -1, -1) for k in np.flatnonzero(~np.isfinite(timestamps))]
    rate = float(1.0 / np.median(d)) if d.size and np.median(d) > 0 else float("nan")
    return ValidationReport(violations, nonfinite, rate, shape_problems)


@dataclass(frozen=True, eq=False)
class ThermalSequence:
    """Timestamped stack of temperature frames in kelvin.

    ``frames`` has shape ``(F, height, width)``. Pass ``check=False`` to hold
    data that violates the invariants, e.g. to run :func:`validate_sequence`
    on it.
    """

    timestamps: np.ndarray
    frames: np.ndarray
    check: InitVar[bool] = True

    def __post_init__(self, check):
        ts = _frozen(self.timestamps, np.float64).reshape(-1)
        fr = np.asarray(self.frames)
        if not np.issubdtype(fr.dtype, np.floating):
            fr = fr.astype(np.float64)
        fr = _frozen(fr)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "frames", fr)
        if check:
            report = _inspect(ts, fr)
            if not report.ok:
                msgs = list(report.shape_problems)
                if report.monotonicity_violations:
                    msgs.append(
                        "timestamps not strictly increasing at index "
                        f"{report.monotonicity_violations[0]}"
                    )
                if report.nonfinite:
                    msgs.append(f"{report.nonfinite_count} non-finite value(s), first at {report.nonfinite[0]}")
                raise InvalidSequenceError("; ".join(msgs))

    @property
    def height(self) -> int:
        return int(self.frames.shape[1])

    @property
    def width(self) -> int:
        return int(self.frames.shape[2])

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def frame_interval(self) -> float:
        if self.n_frames < 2:
            return float("nan")
        return float(np.median(np.diff(self.timestamps)))

    @property
    def duration(self) -> float:
        """Covered time, counting the last frame's own interval."""
        if self.n_frames < 2:
            return 0.0
        return float(self.timestamps[-1] - self.timestamps[0] + self.frame_interval)

    def subset(self, mask) -> "ThermalSequence":
        mask = np.asarray(mask)
        return ThermalSequence(self.timestamps[mask], self.frames[mask])


@dataclass(frozen=True, eq=False)
class EcgTrace:
    sample_rate: float
    samples: np.ndarray  # millivolts
    start_time: float = 0.0

    def __post_init__(self):
        s = _frozen(self.samples, np.float64).reshape(-1)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "start_time", float(self.start_time))
        if not (self.sample_rate > 0 and np.isfinite(self.sample_rate)):
            raise InvalidTraceError(f"sample_rate must be > 0, got {self.sample_rate}")
        if s.size < 2:
            raise InvalidTraceError("an ECG trace needs at least 2 samples")
        if not np.all(np.isfinite(s)):
            raise InvalidTraceError("ECG samples must be finite")

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) / self.sample_rate

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class RPeakSeries:
    peak_times: np.ndarray

    def __post_init__(self):
        t = _frozen(self.peak_times, np.float64).reshape(-1)
        object.__setattr__(self, "peak_times", t)
        if not np.all(np.isfinite(t)):
            raise InvalidTraceError("R-peak times must be finite")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise InvalidTraceError("R-peak times must be strictly increasing")

    def __len__(self):
        return int(self.peak_times.size)

    @property
    def implausible_rr(self) -> np.ndarray:
        """Indices of RR intervals outside the plausible range."""
        rr = np.diff(self.peak_times)
        lo, hi = RR_PLAUSIBLE
        return np.flatnonzero((rr < lo) | (rr > hi))

    @property
    def plausible(self) -> bool:
        return self.implausible_rr.size == 0


@dataclass(frozen=True, eq=False)
class PixelSeries:
    """Temperature series at one pixel.

    ``samples`` keeps the individual readings behind each value, shape
    ``(F, pooled_pixels)``; ``values`` is their per-frame mean. A raw,
    unpooled series has ``pooled_pixels == 1``.
    """

    pixel: tuple
    times: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        t = _frozen(self.times, np.float64).reshape(-1)
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 1:
            s = s[:, None]
        s = _frozen(s)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "pixel", tuple(int(v) for v in self.pixel))
        if s.shape[0] != t.size:
            raise InvalidSequenceError(f"{t.size} times for {s.shape[0]} values")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise InvalidSequenceError("series times must be strictly increasing")

    @property
    def values(self) -> np.ndarray:
        return self.samples.mean(axis=1)

    @property
    def pooled_pixels(self) -> int:
        return int(self.samples.shape[1])

    def __len__(self):
        return int(self.times.size)

    @property
    def duration(self) -> float:
        if len(self) < 2:
            return 0.0
        d = np.diff(self.times)
        return float(self.times[-1] - self.times[0] + np.median(d))


@dataclass(frozen=True, eq=False)
class CycleProfile:
    """Phase-binned synchronous average of one window.

    Empty bins have ``sample_count == 0`` and NaN in ``mean``, ``sd`` and
    ``se``. ``sample_count`` counts frames; each frame contributes
    ``pooled_pixels`` readings, so ``se = sd / sqrt(sample_count * pooled_pixels)``.
    """

    phase_bin_centers: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    se: np.ndarray
    sample_count: np.ndarray
    t_rr: float
    window_start: float
    n_cycles: int
    pooled_pixels: int = 1

    def __post_init__(self):
        for name in ("phase_bin_centers", "mean", "sd", "se", "sample_count"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def empty(self) -> np.ndarray:
        return self.sample_count == 0

    @property
    def n_bins(self) -> int:
        return int(self.mean.size)


@dataclass(frozen=True, eq=False)
class LockInMap:
    """Per-pixel lock-in summary over the frame interior.

    Index ``[i, j]`` corresponds to frame pixel ``(i + 1, j + 1)``. ``phase`` is
    NaN wherever ``amplitude`` is 0 or the pixel is invalid.
    """

    amplitude: np.ndarray
    phase: np.ndarray
    se_mean: np.ndarray
    valid: np.ndarray
    fundamental: np.ndarray
    t_rr: float
    window_start: float
    n_cycles: int

    def __post_init__(self):
        for name in ("amplitude", "phase", "se_mean", "valid", "fundamental"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def shape(self):
        return self.amplitude.shape


def validate_sequence(seq: ThermalSequence) -> ValidationReport:
    """Report monotonicity violations, non-finite values and frame rate.

    Never raises; build the sequence with ``check=False`` to inspect data that
    would otherwise be rejected.
    """
    return _inspect(seq.timestamps, seq.frames)


def _check_interior(pixel, height, width):
    r, c = (int(v) for v in pixel)
    if not (1 <= r <= height - 2 and 1 <= c <= width - 2):
        raise NeighborhoodError((r, c), height, width)
    return r, c


def spatial_average_3x3(seq: ThermalSequence, pixel) -> PixelSeries:
    """Mean of a pixel and its 8 neighbors in every frame.

    The nine readings per frame are kept on the returned series so that the
    standard error can count them individually.
    """
    r, c = _check_interior(pixel, seq.height, seq.width)
    block = np.asarray(seq.frames[:, r - 1:r + 2, c - 1:c + 2], dtype=np.float64)
    return PixelSeries((r, c), seq.timestamps, block.reshape(seq.n_frames, 9))


def raw_pixel_series(seq: ThermalSequence, pixel) -> PixelSeries:
    r, c = (int(v) for v in pixel)
    if not (0 <= r < seq.height and 0 <= c < seq.width):
        raise NeighborhoodError((r, c), seq.height, seq.width)
    return PixelSeries((r, c), seq.timestamps, np.asarray(seq.frames[:, r, c], dtype=np.float64))


def pool_3x3(frames, offset=None):
    """3x3 box mean and mean of squares over the interior of every frame.

    Returns ``(mean, mean_sq)`` each of shape ``(F, H-2, W-2)`` in float64.
    ``offset`` (broadcastable to the interior) is subtracted from every reading
    first, which keeps the squares well conditioned around a 300 K baseline.
    The nine terms are summed in a fixed order.
    """
    fr = np.asarray(frames, dtype=np.float64)
    _, h, w = fr.shape
    total = np.zeros((fr.shape[0], h - 2, w - 2))
    total_sq = np.zeros_like(total)
    for dr in range(3):
        for dc in range(3):
            x = fr[:, dr:dr + h - 2, dc:dc + w - 2]
            if offset is not None:
                x = x - offset
            total += x
            total_sq += x * x
    return total / 9.0, total_sq / 9.0
