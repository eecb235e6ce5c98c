"""Synthetic ECG + thermal video with exact ground truth.

Each heartbeat is rendered from a fixed PQRST template built from Gaussian
bumps; the template is shifted so its maximum falls exactly on the scheduled
R-peak. The thermal scene follows ``baseline + drift*t + s(t) + n(t)`` where
``s`` is a cardiac-locked waveform on the artery mask and ``n`` is i.i.d.
Gaussian noise. Random draws use one counter-based stream per frame, so the
output does not depend on generation order.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .core import EcgTrace, ThermalSequence
from .errors import InvalidConfigError

WAVEFORMS = ("sinusoid", "triangular")

# (amplitude mV, center s relative to R, width s)
PQRST = (
    (0.15, -0.20, 0.025),  # P
    (-0.12, -0.028, 0.010),  # Q
    (1.00, 0.0, 0.010),  # R
    (-0.25, 0.030, 0.011),  # S
    (0.30, 0.26, 0.040),  # T
)
_TEMPLATE_SPAN = (-0.35, 0.45)

# stream ids for SeedSequence keys
_RR_STREAM, _ECG_NOISE_STREAM, _FRAME_STREAM, _TEXTURE_STREAM = 1, 2, 3, 4


def _gauss_sum(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    for amp, mu, sig in PQRST:
        out += amp * np.exp(-0.5 * ((t - mu) / sig) ** 2)
    return out


@lru_cache(maxsize=1)
def _template_offset():
    res = minimize_scalar(lambda t: -_gauss_sum(t), bounds=(-0.01, 0.01),
                          method="bounded", options={"xatol": 1e-12})
    return float(res.x)


def pqrst_template(t):
    """Beat template in mV, with its global maximum at ``t == 0``."""
    return _gauss_sum(np.asarray(t, dtype=np.float64) + _template_offset())


def unit_waveform(kind, theta):
    """Unit-amplitude periodic wave, maximal at ``theta == 0`` (mod 2*pi)."""
    theta = np.asarray(theta, dtype=np.float64)
    if kind == "sinusoid":
        return np.cos(theta)
    if kind == "triangular":
        wrapped = np.mod(theta + np.pi, 2 * np.pi) - np.pi
        return 1.0 - 2.0 * np.abs(wrapped) / np.pi
    raise InvalidConfigError([f"waveform must be one of {WAVEFORMS}, got {kind!r}"])


def _rng(seed, *keys):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *keys])))


def block_mask(height, width, top, left, size_r, size_c=None):
    size_c = size_r if size_c is None else size_c
    m = np.zeros((height, width), dtype=bool)
    m[top:top + size_r, left:left + size_c] = True
    return m


@dataclass(frozen=True)
class SynthConfig:
    duration: float = 30.0
    ecg_rate: float = 500.0
    frame_rate: float = 30.0
    width: int = 64
    height: int = 64
    heart_rate: float = 72.0
    rr_jitter: float = 0.05
    signal_amplitude: float = 0.010
    noise_sd: float = 0.030
    waveform: str = "sinusoid"
    # boolean (height, width) array or iterable of (row, col); None -> centered 8x8 block
    artery_mask: object = None
    # scalar radians, or a (height, width) array of per-pixel phases
    artery_phase: object = 0.0
    baseline: float = 307.0
    drift: float = 0.0
    seed: int = 0
    # extensions beyond the core scene; all off by default
    ecg_noise_snr_db: float | None = None
    texture_sd: float = 0.0
    # ((time_s, (d_row, d_col)[, hold_s]), ...): scene displaced from time_s on,
    # or only for hold_s seconds when given
    motion_events: tuple = ()
    start_time: float = 0.0
    mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        problems = []
        for name in ("duration", "ecg_rate", "frame_rate", "heart_rate"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                problems.append(f"{name} must be > 0 (got {v})")
        if not (0 <= self.rr_jitter < 0.3):
            problems.append(f"rr_jitter must be in [0, 0.3) (got {self.rr_jitter})")
        if not self.signal_amplitude >= 0:
            problems.append(f"signal_amplitude must be >= 0 (got {self.signal_amplitude})")
        if not self.noise_sd >= 0:
            problems.append(f"noise_sd must be >= 0 (got {self.noise_sd})")
        if not self.texture_sd >= 0:
            problems.append(f"texture_sd must be >= 0 (got {self.texture_sd})")
        if self.waveform not in WAVEFORMS:
            problems.append(f"waveform must be one of {WAVEFORMS} (got {self.waveform!r})")
        if int(self.width) < 3 or int(self.height) < 3:
            problems.append(f"frame must be at least 3x3 (got {self.height}x{self.width})")
        mask = None
        if not problems:
            try:
                mask = self._build_mask()
            except ValueError as exc:
                problems.append(str(exc))
        if mask is not None:
            inner = np.zeros_like(mask)
            inner[1:-1, 1:-1] = True
            if np.any(mask & ~inner):
                problems.append("artery_mask must lie within the frame interior (1-pixel border excluded)")
            ph = np.asarray(self.artery_phase, dtype=np.float64)
            if ph.ndim not in (0, 2) or (ph.ndim == 2 and ph.shape != mask.shape):
                problems.append("artery_phase must be a scalar or a (height, width) array")
        if problems:
            raise InvalidConfigError(problems)
        object.__setattr__(self, "mask", mask)

    def _build_mask(self):
        h, w = int(self.height), int(self.width)
        m = self.artery_mask
        if m is None:
            s = min(8, h - 2, w - 2)
            return block_mask(h, w, (h - s) // 2, (w - s) // 2, s)
        arr = np.asarray(m)
        if arr.dtype == bool:
            if arr.shape != (h, w):
                raise ValueError(f"artery_mask shape {arr.shape} != frame shape {(h, w)}")
            return arr.copy()
        out = np.zeros((h, w), dtype=bool)
        for r, c in np.asarray(m, dtype=int).reshape(-1, 2):
            if not (0 <= r < h and 0 <= c < w):
                raise ValueError(f"artery_mask pixel {(r, c)} outside the frame")
            out[r, c] = True
        return out

    def replace(self, **changes) -> "SynthConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    true_rpeak_times: np.ndarray
    true_rr: np.ndarray
    artery_mask: np.ndarray
    signal_amplitude: float
    artery_phase: object
    waveform: str
    # R-peak schedule extended by one beat on each side; defines the cardiac
    # phase of frames before the first and after the last real R-peak.
    phase_anchors: np.ndarray = None

    def to_json(self) -> dict:
        ph = np.asarray(self.artery_phase, dtype=float)
        return {
            "true_rpeak_times": [float(v) for v in self.true_rpeak_times],
            "true_rr": [float(v) for v in self.true_rr],
            "artery_mask": [[int(r), int(c)] for r, c in np.argwhere(self.artery_mask)],
            "mask_shape": list(self.artery_mask.shape),
            "signal_amplitude": float(self.signal_amplitude),
            "artery_phase": float(ph) if ph.ndim == 0 else ph.tolist(),
            "waveform": self.waveform,
            "phase_anchors": [float(v) for v in self.phase_anchors],
        }


def rr_schedule(cfg: SynthConfig):
    """Draw the beat schedule.

    Returns ``(anchors, n_real)``: ``anchors[1:n_real + 1]`` are the R-peaks
    inside ``[start, start + duration)``; ``anchors[0]`` and ``anchors[-1]``
    are virtual beats just outside.
    """
    mean_rr = 60.0 / cfg.heart_rate
    rng = _rng(cfg.seed, _RR_STREAM)
    end = cfg.start_time + cfg.duration
    rrs = []

    def draw():
        v = mean_rr * (1.0 + cfg.rr_jitter * rng.standard_normal()) if cfg.rr_jitter > 0 else mean_rr
        v = float(np.clip(v, 0.3, 2.0))
        rrs.append(v)
        return v

    first = draw()
    peaks = [cfg.start_time + first / 2.0]
    while peaks[-1] < end:
        peaks.append(peaks[-1] + draw())
    anchors = np.array([peaks[0] - first] + peaks)
    return anchors, len(peaks) - 1


def synth_ecg(cfg: SynthConfig):
    """Render an ECG trace and its ground truth."""
    anchors, n_real = rr_schedule(cfg)
    peaks = anchors[1:n_real + 1]
    n = int(round(cfg.duration * cfg.ecg_rate))
    t = cfg.start_time + np.arange(n) / cfg.ecg_rate
    x = np.zeros(n)
    lo, hi = _TEMPLATE_SPAN
    for p in peaks:
        i0 = max(0, int(np.floor((p + lo - cfg.start_time) * cfg.ecg_rate)))
        i1 = min(n, int(np.ceil((p + hi - cfg.start_time) * cfg.ecg_rate)) + 1)
        x[i0:i1] += pqrst_template(t[i0:i1] - p)
    if cfg.ecg_noise_snr_db is not None:
        x = add_white_noise(x, cfg.ecg_noise_snr_db, _rng(cfg.seed, _ECG_NOISE_STREAM))
    gt = GroundTruth(
        true_rpeak_times=peaks.copy(),
        true_rr=np.diff(peaks),
        artery_mask=cfg.mask.copy(),
        signal_amplitude=cfg.signal_amplitude,
        artery_phase=cfg.artery_phase,
        waveform=cfg.waveform,
        phase_anchors=anchors,
    )
    return EcgTrace(cfg.ecg_rate, x, cfg.start_time), gt


def add_white_noise(x, snr_db, rng):
    """Add white Gaussian noise at ``snr_db`` relative to the variance of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    power = float(np.var(x))
    sd = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    return x + sd * rng.standard_normal(x.shape)


def cardiac_phase(anchors, t):
    """Fraction of the current beat elapsed at ``t``, in [0, 1).

    Piecewise-linear between consecutive anchors, the same convention the
    time warp uses.
    """
    t = np.asarray(t, dtype=np.float64)
    k = np.searchsorted(anchors, t, side="right") - 1
    k = np.clip(k, 0, anchors.size - 2)
    frac = (t - anchors[k]) / (anchors[k + 1] - anchors[k])
    return np.clip(frac, 0.0, np.nextafter(1.0, 0.0))


def frame_times(cfg: SynthConfig):
    n = int(round(cfg.duration * cfg.frame_rate))
    return cfg.start_time + np.arange(n) / cfg.frame_rate


def _texture(cfg):
    from scipy.ndimage import gaussian_filter

    h, w = int(cfg.height), int(cfg.width)
    if cfg.texture_sd == 0:
        return np.zeros((h, w))
    field_ = gaussian_filter(_rng(cfg.seed, _TEXTURE_STREAM).standard_normal((h, w)), 1.5, mode="wrap")
    return cfg.texture_sd * field_ / field_.std()


def _displacement(cfg, t):
    dr = dc = 0
    for event in sorted(cfg.motion_events, key=lambda e: e[0]):
        when, (r, c) = event[0], event[1]
        hold = event[2] if len(event) > 2 else np.inf
        if when <= t < when + hold:
            dr, dc = int(r), int(c)
    return dr, dc


def synth_thermal_components(cfg: SynthConfig, gt: GroundTruth):
    """Return ``(timestamps, clean, noise)`` with ``clean + noise`` the scene."""
    times = frame_times(cfg)
    h, w = int(cfg.height), int(cfg.width)
    mask = np.asarray(gt.artery_mask, dtype=bool)
    if mask.shape != (h, w) or np.any(mask[[0, -1], :]) or np.any(mask[:, [0, -1]]):
        raise InvalidConfigError(["artery_mask must lie within the frame interior"])
    phase_offset = np.asarray(gt.artery_phase, dtype=np.float64)
    static = cfg.baseline + _texture(cfg)
    frac = cardiac_phase(gt.phase_anchors, times)
    clean = np.empty((times.size, h, w))
    noise = np.empty_like(clean)
    amp = gt.signal_amplitude
    for k, t in enumerate(times):
        frame = static + cfg.drift * (t - cfg.start_time)
        if amp > 0:
            frame = frame + np.where(mask, amp * unit_waveform(gt.waveform, 2 * np.pi * frac[k] + phase_offset), 0.0)
        dr, dc = _displacement(cfg, t)
        if dr or dc:
            frame = np.roll(frame, (dr, dc), axis=(0, 1))
        clean[k] = frame
        if cfg.noise_sd > 0:
            noise[k] = cfg.noise_sd * _rng(cfg.seed, _FRAME_STREAM, k).standard_normal((h, w))
        else:
            noise[k] = 0.0
    return times, clean, noise


def synth_thermal(cfg: SynthConfig, gt: GroundTruth) -> ThermalSequence:
    times, clean, noise = synth_thermal_components(cfg, gt)
    return ThermalSequence(times, clean + noise)


def synth_dataset(cfg: SynthConfig):
    """ECG, thermal sequence and ground truth on one clock from one seed."""
    ecg, gt = synth_ecg(cfg)
    return ecg, synth_thermal(cfg, gt), gt
