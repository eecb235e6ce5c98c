"""Inter-frame motion score by exhaustive integer block matching.

For each consecutive frame pair the center crop of frame ``k`` is compared
with frame ``k+1`` displaced by every integer shift in ``[-3, 3]^2``. The
best shift is the one with the lowest mean absolute difference (MAD); the
score is that MAD normalized by the mean absolute deviation of frame ``k``'s
crop from its own mean. A pure translation by ``(dr, dc)`` (content moving
down ``dr`` rows and right ``dc`` columns) is reported as shift ``(dr, dc)``
with score 0.

A nonzero shift is reported only when its improvement over no shift is
significant: the per-pixel decrease in absolute difference must have a
paired z-statistic of at least ``z_min``. Frames with no structure to match
(pure sensor noise) therefore report ``(0, 0)``.
"""

from __future__ import annotations

import numpy as np

from .core import ThermalSequence
from .errors import SequenceTooShortError

MAX_SHIFT = 3
Z_MIN = 4.0


def _shifts(max_shift):
    # (0, 0) first so exact ties resolve to "no motion"
    rng = range(-max_shift, max_shift + 1)
    return [(0, 0)] + [(r, c) for r in rng for c in rng if (r, c) != (0, 0)]


def motion_score(seq: ThermalSequence, max_shift: int = MAX_SHIFT, z_min: float = Z_MIN):
    """Score every consecutive frame pair.

    Returns
    -------
    scores : ndarray, shape (F-1,)
        Best-shift MAD over the normalizing spread; 0 for identical frames.
    shifts : ndarray, shape (F-1, 2)
        Integer ``(row, col)`` displacement achieving the best match.
    """
    if seq.n_frames < 2:
        raise SequenceTooShortError("motion scoring needs at least 2 frames")
    m = int(max_shift)
    h, w = seq.height, seq.width
    if h <= 2 * m or w <= 2 * m:
        raise SequenceTooShortError(f"frames of {h}x{w} are too small for a +/-{m} px search")
    fr = np.asarray(seq.frames, dtype=np.float64)
    ref = fr[:-1, m:h - m, m:w - m]
    best = np.full(ref.shape[0], np.inf)
    shifts = np.zeros((ref.shape[0], 2), dtype=np.int64)
    for dr, dc in _shifts(m):
        moved = fr[1:, m + dr:h - m + dr, m + dc:w - m + dc]
        mad = np.abs(moved - ref).mean(axis=(1, 2))
        better = mad < best
        best[better] = mad[better]
        shifts[better] = (dr, dc)
    for k in np.flatnonzero(np.any(shifts != 0, axis=1)):
        dr, dc = shifts[k]
        a = ref[k]
        gain = np.abs(fr[k + 1, m:h - m, m:w - m] - a) - np.abs(fr[k + 1, m + dr:h - m + dr, m + dc:w - m + dc] - a)
        sd = gain.std()
        if sd > 0 and gain.mean() / (sd / np.sqrt(gain.size)) < z_min:
            shifts[k] = (0, 0)
    spread = np.abs(ref - ref.mean(axis=(1, 2), keepdims=True)).mean(axis=(1, 2))
    scores = np.where(best == 0, 0.0, best / np.maximum(spread, np.finfo(float).tiny))
    return scores, shifts


def motion_cost(scores, shifts, residual_gate=3.0):
    """Per-pair motion: displacement length in pixels plus excess residual.

    A translation the search compensates leaves only a noise-level residual,
    so the displacement itself has to count. The residual counts only above
    ``residual_gate`` times the median score, otherwise sensor noise summed
    over a long window would outweigh a single displacement.
    """
    scores = np.asarray(scores, dtype=np.float64)
    floor = residual_gate * np.median(scores) if scores.size else 0.0
    excess = np.clip(scores - floor, 0.0, None)
    return np.hypot(*np.asarray(shifts, dtype=np.float64).T) + excess


def select_low_motion_segment(seq: ThermalSequence, duration, cost=None):
    """Contiguous span of ``duration`` seconds with the least total motion.

    The span covers ``round(duration / frame_interval)`` frames and is scored
    by the sum of :func:`motion_cost` over its internal frame pairs; ties go
    to the earliest start. ``cost`` may be passed in to avoid rescoring.
    Returns ``(start, end)`` with ``end`` one frame interval past the last
    included frame.
    """
    if seq.n_frames < 2:
        raise SequenceTooShortError("segment selection needs at least 2 frames")
    dt = seq.frame_interval
    if duration > seq.duration + 1e-9:
        raise SequenceTooShortError(
            f"sequence spans {seq.duration:g} s, shorter than the requested {duration:g} s"
        )
    n = max(2, min(seq.n_frames, int(round(duration / dt))))
    if cost is None:
        cost = motion_cost(*motion_score(seq))
    csum = np.concatenate(([0.0], np.cumsum(cost)))
    # frames i .. i+n-1 contain pairs i .. i+n-2
    totals = csum[n - 1:] - csum[:-(n - 1)]
    i = int(np.argmin(totals))
    return float(seq.timestamps[i]), float(seq.timestamps[i + n - 1] + dt)


def segment_frames(seq: ThermalSequence, start, end):
    """Frames with ``start <= t < end``."""
    t = seq.timestamps
    return seq.subset((t >= start - 1e-9) & (t < end - 1e-9))
