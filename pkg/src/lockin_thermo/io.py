"""File formats.

THS1 thermal container (all little-endian)::

    offset  size          field
    0       4             magic b"THS1"
    4       4  u32        version (1)
    8       4  u32        width
    12      4  u32        height
    16      4  u32        frame_count
    20      4  u32        reserved, 0
    24      8*F  f64      timestamps, seconds
    ..      4*F*H*W f32   frames, kelvin, row-major

ECG CSV: header ``time_s,voltage_mv`` then one row per sample, ``\\n``
line endings. Values are written in shortest round-trip form so reading back
gives the same doubles.

Report CSVs (peaks, motion, lock-in profiles, maps) use 6 significant
digits so their text is stable across platforms.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .core import EcgTrace, RPeakSeries, ThermalSequence
from .errors import (
    BadMagicError,
    CsvHeaderError,
    FormatError,
    NonMonotonicTimestampsError,
    NonUniformSamplingError,
    RaggedCsvError,
    TrailingDataError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)

THS1_MAGIC = b"THS1"
THS1_VERSION = 1
_HEADER = struct.Struct("<4s5I")
ECG_HEADER = ("time_s", "voltage_mv")
RPEAKS_HEADER = ("peak_time_s",)
MOTION_HEADER = ("frame", "score", "shift_r", "shift_c")
PROFILE_HEADER = ("window_start", "bin", "phase_s", "mean_K", "sd_K", "se_K", "count")
MAP_HEADER = ("row", "col", "amplitude_K", "phase_rad", "valid")
PGM_MAX = 65535


def fmt(x) -> str:
    """Fixed 6-significant-digit text used by every report CSV."""
    return format(float(x), ".6g")


def atomic_write(path, data: bytes):
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write(path, text.encode("utf-8"))


# THS1 ----------------------------------------------------------------------

def ths1_bytes(seq: ThermalSequence) -> bytes:
    header = _HEADER.pack(THS1_MAGIC, THS1_VERSION, seq.width, seq.height, seq.n_frames, 0)
    ts = np.ascontiguousarray(seq.timestamps, dtype="<f8").tobytes()
    frames = np.ascontiguousarray(seq.frames, dtype="<f4").tobytes()
    return header + ts + frames


def write_ths1(path, seq: ThermalSequence):
    atomic_write(path, ths1_bytes(seq))


def parse_ths1(data: bytes) -> ThermalSequence:
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(f"THS1 header needs {_HEADER.size} bytes, file has {len(data)}")
    magic, version, width, height, count, reserved = _HEADER.unpack_from(data)
    if magic != THS1_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {THS1_MAGIC!r}")
    if version != THS1_VERSION:
        raise UnsupportedVersionError(f"THS1 version {version} not supported (expected {THS1_VERSION})")
    if reserved != 0:
        raise FormatError(f"THS1 reserved header field must be 0, got {reserved}")
    if width < 3 or height < 3 or count < 1:
        raise FormatError(f"THS1 header describes {count} frame(s) of {height}x{width}; need >= 1 frame of >= 3x3")
    expected = _HEADER.size + 8 * count + 4 * count * height * width
    if len(data) < expected:
        raise TruncatedPayloadError(
            f"THS1 header claims {count} frames of {height}x{width} ({expected} bytes) "
            f"but the file has {len(data)} bytes"
        )
    if len(data) > expected:
        raise TrailingDataError(f"THS1 file has {len(data) - expected} unexpected trailing bytes")
    off = _HEADER.size
    ts = np.frombuffer(data, dtype="<f8", count=count, offset=off).astype(np.float64)
    frames = np.frombuffer(data, dtype="<f4", count=count * height * width, offset=off + 8 * count)
    frames = frames.astype(np.float32).reshape(count, height, width)
    if not np.all(np.isfinite(ts)):
        raise FormatError("THS1 timestamps must be finite")
    bad = np.flatnonzero(~(np.diff(ts) > 0))
    if bad.size:
        k = int(bad[0])
        raise NonMonotonicTimestampsError(
            f"THS1 timestamps not strictly increasing at frame {k + 1} ({ts[k + 1]!r} after {ts[k]!r})"
        )
    if not np.all(np.isfinite(frames)):
        raise FormatError("THS1 frames contain non-finite temperatures")
    return ThermalSequence(ts, frames)


def read_ths1(path) -> ThermalSequence:
    return parse_ths1(Path(path).read_bytes())


# CSV -----------------------------------------------------------------------

def _read_rows(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(c.strip() for c in rows[0]) != tuple(header):
        got = ",".join(rows[0]) if rows else "<empty file>"
        raise CsvHeaderError(f"{path}: expected header {','.join(header)!r}, got {got!r}")
    body = rows[1:]
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise RaggedCsvError(f"{path}: line {lineno} has {len(row)} field(s), expected {len(header)}")
    return body


def read_table(path, header) -> dict:
    """Parse a report CSV into ``{column: float array}``."""
    body = _read_rows(path, header)
    try:
        cols = np.array([[float(v) for v in row] for row in body], dtype=np.float64).reshape(len(body), len(header))
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric field ({exc})") from None
    return {name: cols[:, i] for i, name in enumerate(header)}


def table_text(header, rows) -> str:
    buf = _io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_ecg_csv(path, ecg: EcgTrace):
    lines = [",".join(ECG_HEADER)]
    lines += [f"{t!r},{v!r}" for t, v in zip(ecg.times.tolist(), ecg.samples.tolist())]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_ecg_csv(path) -> EcgTrace:
    tab = read_table(path, ECG_HEADER)
    t, v = tab["time_s"], tab["voltage_mv"]
    if t.size < 2:
        raise FormatError(f"{path}: an ECG needs at least 2 samples")
    d = np.diff(t)
    step = (t[-1] - t[0]) / (t.size - 1)
    if not step > 0 or np.any(np.abs(d - step) > 1e-9 * step + 4 * np.spacing(np.abs(t[1:]))):
        raise NonUniformSamplingError(f"{path}: time_s is not uniformly sampled")
    return EcgTrace(1.0 / step, v, float(t[0]))


def write_rpeaks_csv(path, peaks: RPeakSeries):
    atomic_write_text(path, table_text(RPEAKS_HEADER, ([t] for t in peaks.peak_times)))


def read_rpeaks_csv(path) -> RPeakSeries:
    return RPeakSeries(read_table(path, RPEAKS_HEADER)["peak_time_s"])


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def profile_rows(window_results):
    for wr in window_results:
        p = wr.profile
        for b in range(p.n_bins):
            yield (wr.window_start, str(b), p.phase_bin_centers[b], p.mean[b], p.sd[b], p.se[b],
                   str(int(p.sample_count[b])))


# PGM -----------------------------------------------------------------------

def pgm16_bytes(values, lo, hi) -> bytes:
    """Binary 16-bit PGM; ``lo`` maps to 0, ``hi`` to 65535, NaN to 0."""
    v = np.asarray(values, dtype=np.float64)
    span = hi - lo if hi > lo else 1.0
    scaled = np.where(np.isfinite(v), np.round((v - lo) / span * PGM_MAX), 0)
    px = np.clip(scaled, 0, PGM_MAX).astype(">u2")
    h, w = v.shape
    return f"P5\n{w} {h}\n{PGM_MAX}\n".encode("ascii") + px.tobytes()


def read_pgm16(path):
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    if int(parts[2]) != PGM_MAX:
        raise FormatError(f"{path}: expected maxval {PGM_MAX}")
    px = np.frombuffer(parts[3], dtype=">u2")
    if px.size != w * h:
        raise TruncatedPayloadError(f"{path}: {px.size} pixels for {w}x{h}")
    return px.reshape(h, w).astype(np.int64)
