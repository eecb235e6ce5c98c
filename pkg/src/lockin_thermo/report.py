"""Standalone SVG report: raw traces next to the locked cycle profile.

Written by hand rather than through a plotting library so that identical
inputs give byte-identical files.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PANEL_W, PANEL_H = 640, 200
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 40


def _c(v):
    return f"{v:.2f}"


def _ticks(lo, hi, n=5):
    if not hi > lo:
        return [lo]
    step = 10 ** np.floor(np.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= n:
            step *= m
            break
    start = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(start, hi + step * 1e-9, step)]


class _Panel:
    def __init__(self, top, title, xlabel, ylabel, xlim, ylim):
        self.top = top
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.x0, self.x1 = xlim
        y0, y1 = ylim
        if not y1 > y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        pad = 0.05 * (y1 - y0)
        self.y0, self.y1 = y0 - pad, y1 + pad
        if not self.x1 > self.x0:
            self.x1 = self.x0 + 1.0
        self.parts = []

    def sx(self, x):
        return MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * (PANEL_W - MARGIN_L - MARGIN_R)

    def sy(self, y):
        h = PANEL_H - MARGIN_T - MARGIN_B
        return self.top + MARGIN_T + (self.y1 - y) / (self.y1 - self.y0) * h

    def line(self, x, y, color, width=1.0):
        pts = " ".join(f"{_c(self.sx(a))},{_c(self.sy(b))}" for a, b in zip(x, y) if np.isfinite(b))
        self.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{pts}"/>')

    def markers(self, x, y, color):
        for a, b in zip(x, y):
            self.parts.append(f'<circle cx="{_c(self.sx(a))}" cy="{_c(self.sy(b))}" r="2.5" fill="{color}"/>')

    def errorbars(self, x, y, err, color):
        for a, b, e in zip(x, y, err):
            if not (np.isfinite(b) and np.isfinite(e)):
                continue
            xs = _c(self.sx(a))
            self.parts.append(
                f'<line x1="{xs}" y1="{_c(self.sy(b - e))}" x2="{xs}" y2="{_c(self.sy(b + e))}" stroke="{color}"/>'
            )

    def render(self):
        left, right = MARGIN_L, PANEL_W - MARGIN_R
        top, bottom = self.top + MARGIN_T, self.top + PANEL_H - MARGIN_B
        out = [f'<g id="panel-{int(self.top)}">',
               f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
               'fill="none" stroke="#444"/>',
               f'<text x="{left}" y="{top - 8}" font-size="13">{escape(self.title)}</text>',
               f'<text x="{(left + right) / 2:.1f}" y="{bottom + 32}" font-size="11" '
               f'text-anchor="middle">{escape(self.xlabel)}</text>',
               f'<text x="14" y="{(top + bottom) / 2:.1f}" font-size="11" text-anchor="middle" '
               f'transform="rotate(-90 14 {(top + bottom) / 2:.1f})">{escape(self.ylabel)}</text>']
        for t in _ticks(self.x0, self.x1):
            out.append(f'<text x="{_c(self.sx(t))}" y="{bottom + 14}" font-size="10" '
                       f'text-anchor="middle">{t:.6g}</text>')
        for t in _ticks(self.y0, self.y1, 4):
            out.append(f'<text x="{left - 4}" y="{_c(self.sy(t) + 3)}" font-size="10" '
                       f'text-anchor="end">{t:.6g}</text>')
        out += self.parts
        out.append("</g>")
        return out


def _finite_range(*arrays):
    vals = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return 0.0, 1.0
    return float(vals.min()), float(vals.max())


def render_report(ecg, peaks, series, profile, error="se", title="Lock-in thermography report") -> str:
    """SVG text with three panels: ECG with R-peaks, raw pixel temperature, locked profile.

    ``error`` picks the error bars on the locked profile: ``"se"`` or ``"sd"``.
    """
    if error not in ("se", "sd"):
        raise ValueError("error must be 'se' or 'sd'")
    panels = []
    t = ecg.times
    p = _Panel(0, "ECG with detected R-peaks", "time (s)", "voltage (mV)",
               (float(t[0]), float(t[-1])), _finite_range(ecg.samples))
    p.line(t, ecg.samples, "#1f4e9c", 0.6)
    pk = peaks.peak_times
    if pk.size:
        idx = np.clip(np.round((pk - ecg.start_time) * ecg.sample_rate).astype(int), 0, t.size - 1)
        p.markers(pk, ecg.samples[idx], "#d62728")
    panels.append(p)

    vals = series.values
    p = _Panel(PANEL_H, f"Raw temperature at pixel {series.pixel} (3x3 mean)", "time (s)", "temperature (K)",
               (float(series.times[0]), float(series.times[-1])), _finite_range(vals))
    p.line(series.times, vals, "#555555", 0.6)
    panels.append(p)

    err = profile.se if error == "se" else profile.sd
    rel = profile.mean - np.nanmean(profile.mean)
    lo, hi = _finite_range(rel - np.nan_to_num(err), rel + np.nan_to_num(err))
    p = _Panel(2 * PANEL_H,
               f"Locked cycle, window {profile.window_start:g} s, {profile.n_cycles} cycles "
               f"(error bars: {error.upper()})",
               "phase after R-peak (s)", "temperature - mean (K)", (0.0, float(profile.t_rr)), (lo, hi))
    p.errorbars(profile.phase_bin_centers, rel, err, "#999999")
    p.line(profile.phase_bin_centers, rel, "#d62728", 1.2)
    p.markers(profile.phase_bin_centers[np.isfinite(rel)], rel[np.isfinite(rel)], "#d62728")
    panels.append(p)

    height = PANEL_H * len(panels) + 20
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" '
           f'viewBox="0 0 {PANEL_W} {height}" font-family="sans-serif">',
           f"<title>{escape(title)}</title>",
           f'<rect width="{PANEL_W}" height="{height}" fill="white"/>']
    for panel in panels:
        out += panel.render()
    out.append("</svg>")
    return "\n".join(out) + "\n"
