"""Piecewise-linear rescaling of the cardiac timeline.

Peak ``k`` is mapped to ``k * t_rr`` and time between peaks is stretched
linearly, so every heartbeat occupies exactly one period on the warped axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RPeakSeries
from .ecg import mean_rr
from .errors import InsufficientPeaksError, InvalidConfigError, WarpDomainError

AUTO = "auto"


@dataclass(frozen=True, eq=False)
class TimeWarp:
    breakpoints_in: np.ndarray
    breakpoints_out: np.ndarray
    t_rr: float

    def __post_init__(self):
        bi = np.array(self.breakpoints_in, dtype=np.float64)
        bo = np.array(self.breakpoints_out, dtype=np.float64)
        for a in (bi, bo):
            a.setflags(write=False)
        object.__setattr__(self, "breakpoints_in", bi)
        object.__setattr__(self, "breakpoints_out", bo)
        if bi.size < 2 or bi.size != bo.size:
            raise InsufficientPeaksError("a warp needs at least 2 matching breakpoints")
        if not (np.all(np.diff(bi) > 0) and np.all(np.diff(bo) > 0)):
            raise WarpDomainError("warp breakpoints must be strictly increasing")

    @property
    def n_cycles(self) -> int:
        return int(self.breakpoints_in.size - 1)

    @property
    def domain(self):
        return float(self.breakpoints_in[0]), float(self.breakpoints_in[-1])

    def inverse(self) -> "TimeWarp":
        return TimeWarp(self.breakpoints_out, self.breakpoints_in, self.t_rr)

    def contains(self, t):
        t = np.asarray(t, dtype=np.float64)
        return (t >= self.breakpoints_in[0]) & (t <= self.breakpoints_in[-1])


def build_warp(peaks: RPeakSeries, t_rr=AUTO) -> TimeWarp:
    """Warp mapping R-peak ``k`` to ``k * t_rr``.

    ``t_rr="auto"`` uses the mean RR interval of ``peaks``.
    """
    times = peaks.peak_times
    if times.size < 2:
        raise InsufficientPeaksError(f"need at least 2 R-peaks to build a warp, got {times.size}")
    if isinstance(t_rr, str):
        if t_rr.lower() != AUTO:
            raise InvalidConfigError([f"t_rr must be 'auto' or seconds, got {t_rr!r}"])
        t_rr = mean_rr(peaks)
    t_rr = float(t_rr)
    if not t_rr > 0:
        raise InvalidConfigError([f"t_rr must be > 0, got {t_rr}"])
    return TimeWarp(times, np.arange(times.size) * t_rr, t_rr)


def warp_time(w: TimeWarp, t):
    """Map original times into the periodic timeline.

    Accepts a scalar or an array; raises :class:`WarpDomainError` if any time
    lies before the first or after the last R-peak.
    """
    arr = np.asarray(t, dtype=np.float64)
    inside = w.contains(arr)
    if not np.all(inside):
        bad = arr[~inside].flat[0]
        lo, hi = w.domain
        raise WarpDomainError(f"time {bad:g} s is outside the R-peak span [{lo:g}, {hi:g}] s")
    out = np.interp(arr, w.breakpoints_in, w.breakpoints_out)
    return float(out) if np.ndim(t) == 0 else out


def phase_of(w: TimeWarp, t):
    """Split a time into ``(cycle_index, phase)`` with ``0 <= phase < t_rr``.

    The last R-peak closes the final cycle and so belongs to no cycle; it is
    rejected like any other out-of-domain time.
    """
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr >= w.breakpoints_in[-1]):
        lo, hi = w.domain
        raise WarpDomainError(f"time {arr.max():g} s is outside the cycle span [{lo:g}, {hi:g}) s")
    warped = np.atleast_1d(np.asarray(warp_time(w, arr), dtype=np.float64))
    cycle = np.floor(warped / w.t_rr).astype(np.int64)
    phase = warped - cycle * w.t_rr
    # floor of an exact multiple can land one cycle low
    over = phase >= w.t_rr
    cycle[over] += 1
    phase[over] = warped[over] - cycle[over] * w.t_rr
    under = phase < 0
    cycle[under] -= 1
    phase[under] = warped[under] - cycle[under] * w.t_rr
    # a time just below the last peak may round onto it
    last = cycle > w.n_cycles - 1
    cycle[last] = w.n_cycles - 1
    phase[last] = np.nextafter(w.t_rr, 0.0)
    if np.ndim(t) == 0:
        return int(cycle[0]), float(phase[0])
    return cycle, phase
