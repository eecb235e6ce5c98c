"""Command-line interface.

Every subcommand writes into the directory given by ``--out``. Exit codes:
0 success, 1 usage error, 2 unreadable or malformed input, 3 failed
precondition (e.g. an underpopulated lock-in window or a border pixel).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .core import raw_pixel_series, spatial_average_3x3
from .ecg import detect_rpeaks
from .errors import FormatError, InvalidConfigError, LockInError
from .lockin import LockInConfig, bin_cycles, sliding_lockin, synchronous_average
from .motion import motion_cost, motion_score, select_low_motion_segment
from .report import render_report
from .spectral import artery_map
from .synth import SynthConfig, block_mask, synth_dataset
from .timewarp import build_warp

log = logging.getLogger("lockin_thermo")

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_PRECONDITION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _pixel(text):
    try:
        r, c = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected R,C, got {text!r}") from None
    return r, c


def _t_rr(text):
    if text.lower() == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected AUTO or seconds, got {text!r}") from None


def _bins(text):
    if text.lower() == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected AUTO or an integer, got {text!r}") from None


def _scalar(text):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", ""):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_config(path) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc.strerror}") from None
    for n, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{n}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _synth_config(args, conf) -> SynthConfig:
    fields = set(SynthConfig.__dataclass_fields__) - {"mask", "artery_mask", "motion_events"}
    kwargs = {}
    for key, value in conf.items():
        if key in fields:
            kwargs[key] = _scalar(value)
        elif key == "artery_mask":
            # r0:r1,c0:c1 (half-open rectangle)
            try:
                rows, cols = value.split(",")
                r0, r1 = (int(v) for v in rows.split(":"))
                c0, c1 = (int(v) for v in cols.split(":"))
            except ValueError:
                raise InvalidConfigError([f"artery_mask must look like r0:r1,c0:c1, got {value!r}"]) from None
            kwargs["_mask_rect"] = (r0, r1, c0, c1)
        elif key not in _LOCKIN_KEYS:
            raise InvalidConfigError([f"unknown config key {key!r}"])
    if args.duration is not None:
        kwargs["duration"] = args.duration
    if args.seed is not None:
        kwargs["seed"] = args.seed
    rect = kwargs.pop("_mask_rect", None)
    if rect is not None:
        h = int(kwargs.get("height", SynthConfig.height))
        w = int(kwargs.get("width", SynthConfig.width))
        r0, r1, c0, c1 = rect
        kwargs["artery_mask"] = block_mask(h, w, r0, c0, r1 - r0, c1 - c0)
    return SynthConfig(**kwargs)


_LOCKIN_KEYS = {"window", "slide", "t_rr", "bins", "min_cycles", "segment_duration", "max_motion"}


def _lockin_settings(args, conf):
    def pick(name, key, parse, default):
        v = getattr(args, name, None)
        if v is not None:
            return v
        if key in conf:
            return parse(conf[key])
        return default

    cfg = LockInConfig(
        window=pick("window", "window", float, 15.0),
        slide=pick("slide", "slide", float, 1.0),
        phase_bins=pick("bins", "bins", _bins, "auto"),
        min_cycles=pick("min_cycles", "min_cycles", int, 4),
    )
    return cfg, pick("t_rr", "t_rr", _t_rr, "auto")


def _load_inputs(args, need_thermal=True):
    seq = None
    if need_thermal:
        seq = io.read_ths1(args.thermal)
        if args.start is not None or args.end is not None:
            t = seq.timestamps
            keep = np.ones(t.size, dtype=bool)
            if args.start is not None:
                keep &= t >= args.start
            if args.end is not None:
                keep &= t < args.end
            if not keep.any():
                raise LockInError("no frames inside the requested --start/--end range")
            seq = seq.subset(keep)
    if args.peaks:
        peaks = io.read_rpeaks_csv(args.peaks)
    elif args.ecg:
        peaks = detect_rpeaks(io.read_ecg_csv(args.ecg))
    else:
        raise UsageError("one of --peaks or --ecg is required")
    return seq, peaks


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required for '{args.command}'")


def cmd_synth(args, conf):
    cfg = _synth_config(args, conf)
    ecg, seq, gt = synth_dataset(cfg)
    out = Path(args.out)
    io.write_ths1(out / "thermal.ths1", seq)
    io.write_ecg_csv(out / "ecg.csv", ecg)
    io.write_json(out / "ground_truth.json", gt.to_json())


def cmd_rpeaks(args, conf):
    _require(args, "ecg")
    peaks = detect_rpeaks(io.read_ecg_csv(args.ecg))
    io.write_rpeaks_csv(Path(args.out) / "rpeaks.csv", peaks)


def cmd_motion(args, conf):
    _require(args, "thermal")
    seq = io.read_ths1(args.thermal)
    duration = args.duration if args.duration is not None else float(conf.get("segment_duration", 30.0))
    threshold = args.max_motion if args.max_motion is not None else _scalar(conf.get("max_motion", "none"))
    scores, shifts = motion_score(seq)
    cost = motion_cost(scores, shifts)
    start, end = select_low_motion_segment(seq, duration, cost)
    rows = [(str(k), s, str(int(r)), str(int(c))) for k, (s, (r, c)) in enumerate(zip(scores, shifts))]
    out = Path(args.out)
    io.atomic_write_text(out / "motion.csv", io.table_text(io.MOTION_HEADER, rows))
    inside = (seq.timestamps[:-1] >= start - 1e-9) & (seq.timestamps[1:] < end - 1e-9)
    worst = float(cost[inside].max()) if inside.any() else 0.0
    segment = {"start_s": float(io.fmt(start)), "end_s": float(io.fmt(end)),
               "duration_s": float(io.fmt(duration)), "max_pair_cost": float(io.fmt(worst)),
               "total_cost": float(io.fmt(cost[inside].sum())), "threshold": threshold,
               "low_motion": None if threshold is None else bool(worst <= float(threshold))}
    io.write_json(out / "segment.json", segment)


def _series(seq, args):
    if getattr(args, "raw", False):
        return raw_pixel_series(seq, args.pixel)
    return spatial_average_3x3(seq, args.pixel)


def cmd_lockin(args, conf):
    _require(args, "thermal", "pixel")
    cfg, t_rr = _lockin_settings(args, conf)
    seq, peaks = _load_inputs(args)
    series = _series(seq, args)
    result = sliding_lockin(series, build_warp(peaks, t_rr), cfg)
    for ws, found in result.skipped:
        print(f"warning: window at {ws:g} s skipped ({found} complete cycles)", file=sys.stderr)
    if not result.windows:
        raise LockInError("no lock-in window had enough complete cycles")
    io.atomic_write_text(Path(args.out) / "lockin.csv",
                         io.table_text(io.PROFILE_HEADER, io.profile_rows(result.windows)))


def _single_profile(args, conf, seq, peaks):
    cfg, t_rr = _lockin_settings(args, conf)
    series = spatial_average_3x3(seq, args.pixel)
    ws = args.window_start if args.window_start is not None else float(series.times[0])
    profile = synchronous_average(bin_cycles(series, build_warp(peaks, t_rr), ws, cfg))
    return series, profile


def cmd_profile(args, conf):
    from .lockin import WindowResult

    _require(args, "thermal", "pixel")
    seq, peaks = _load_inputs(args)
    series, profile = _single_profile(args, conf, seq, peaks)
    out = Path(args.out)
    io.atomic_write_text(out / "profile.csv", io.table_text(
        io.PROFILE_HEADER, io.profile_rows([WindowResult(profile.window_start, profile)])))
    io.atomic_write_text(out / "raw.csv", io.table_text(
        ("time_s", "value_K"), zip(series.times, series.values)))


def cmd_arterymap(args, conf):
    _require(args, "thermal")
    _, t_rr = _lockin_settings(args, conf)
    seq, peaks = _load_inputs(args)
    warp = build_warp(peaks, t_rr)
    smap = artery_map(seq, warp)
    amp, phase = smap.amplitude, smap.phase
    amp_hi = float(np.nanmax(amp)) if np.any(np.isfinite(amp)) else 0.0
    out = Path(args.out)
    io.atomic_write(out / "amplitude.pgm", io.pgm16_bytes(amp, 0.0, amp_hi))
    io.atomic_write(out / "phase.pgm", io.pgm16_bytes(phase, -np.pi, np.pi))
    rows = []
    for (i, j), a in np.ndenumerate(amp):
        rows.append((str(i + 1), str(j + 1), a, phase[i, j], str(int(smap.valid[i, j]))))
    io.atomic_write_text(out / "arterymap.csv", io.table_text(io.MAP_HEADER, rows))
    io.write_json(out / "arterymap.json", {
        "cardiac_frequency_hz": float(io.fmt(smap.cardiac_frequency)),
        "t_rr_s": float(io.fmt(warp.t_rr)),
        "origin": [1, 1],
        "amplitude_pgm": {"value_at_0": 0.0, "value_at_max": float(io.fmt(amp_hi)),
                          "maxval": io.PGM_MAX, "unit": "K",
                          "formula": "K = pixel / maxval * value_at_max"},
        "phase_pgm": {"value_at_0": float(io.fmt(-np.pi)), "value_at_max": float(io.fmt(np.pi)),
                      "maxval": io.PGM_MAX, "unit": "rad",
                      "formula": "rad = value_at_0 + pixel / maxval * (value_at_max - value_at_0)"},
        "start_s": args.start, "end_s": args.end,
    })


def cmd_report(args, conf):
    _require(args, "thermal", "ecg", "pixel")
    seq, peaks = _load_inputs(args)
    ecg = io.read_ecg_csv(args.ecg)
    series, profile = _single_profile(args, conf, seq, peaks)
    svg = render_report(ecg, peaks, series, profile, error="sd" if args.sd else "se")
    io.atomic_write_text(Path(args.out) / "report.svg", svg)


COMMANDS = {
    "synth": cmd_synth,
    "rpeaks": cmd_rpeaks,
    "motion": cmd_motion,
    "lockin": cmd_lockin,
    "profile": cmd_profile,
    "arterymap": cmd_arterymap,
    "report": cmd_report,
}


def build_parser():
    parser = _Parser(prog="lockin-thermo",
                     description="Heartbeat-referenced lock-in thermography pipeline.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="key=value settings file")
        p.add_argument("--ecg")
        p.add_argument("--peaks", help="R-peak CSV from 'rpeaks' (instead of detecting from --ecg)")
        p.add_argument("--thermal")
        p.add_argument("--pixel", type=_pixel, help="R,C")
        p.add_argument("--window", type=float)
        p.add_argument("--slide", type=float)
        p.add_argument("--t-rr", dest="t_rr", type=_t_rr, help="AUTO or seconds")
        p.add_argument("--bins", type=_bins, help="AUTO or count")
        p.add_argument("--min-cycles", dest="min_cycles", type=int)
        p.add_argument("--duration", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--start", type=float, help="ignore frames before this time (s)")
        p.add_argument("--end", type=float, help="ignore frames from this time on (s)")
        if name in ("profile", "report"):
            p.add_argument("--window-start", dest="window_start", type=float)
        if name == "lockin":
            p.add_argument("--raw", action="store_true", help="single pixel, no 3x3 pooling")
        if name == "motion":
            p.add_argument("--max-motion", dest="max_motion", type=float,
                           help="max per-pair motion cost for the segment to count as low-motion")
        if name == "report":
            p.add_argument("--sd", action="store_true", help="error bars show SD instead of SE")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        conf = read_config(args.config) if args.config else {}
        COMMANDS[args.command](args, conf)
    except (UsageError, InvalidConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"input error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_FORMAT
    except LockInError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
