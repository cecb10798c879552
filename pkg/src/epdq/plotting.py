"""Self-contained SVG figures for experiment CSVs (no rendering dependency)."""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .experiments import ExperimentRecord, loglog_regression, read_csv

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=70, right=20, top=40, bottom=55)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


class _Canvas:
    def __init__(self, title: str):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]

    def line(self, x1, y1, x2, y2, color="black", width=1.0, dash=None):
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
                          f'stroke="{color}" stroke-width="{width}"{extra}/>')

    def circle(self, x, y, r, color):
        self.parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}" fill="{color}"/>')

    def rect(self, x, y, w, h, color):
        self.parts.append(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" fill="{color}"/>')

    def text(self, x, y, s, anchor="middle", size=12, extra=""):
        self.parts.append(f'<text x="{_fmt(x)}" y="{_fmt(y)}" text-anchor="{anchor}" font-size="{size}"{extra}>'
                          f"{escape(s)}</text>")

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _frame(cv: _Canvas, xlabel: str, ylabel: str):
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    cv.line(x0, y0, x1, y0)
    cv.line(x0, y0, x0, y1)
    cv.text((x0 + x1) / 2, HEIGHT - 12, xlabel)
    cv.text(16, (y0 + y1) / 2, ylabel, extra=f' transform="rotate(-90 16 {_fmt((y0 + y1) / 2)})"')
    return x0, x1, y0, y1


def _group(records: Sequence[ExperimentRecord]) -> dict[tuple[str, str], dict[int, list[float]]]:
    groups: dict[tuple[str, str], dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in records:
        groups[(r.method, r.value_kind)][r.n_or_k].append(r.value)
    return groups


def loglog_svg(records: Sequence[ExperimentRecord], title: str = "") -> str:
    """Per-``n`` mean and standard deviation in log-log scale with the OLS line of each series."""
    groups = _group(records)
    series = []
    for (method, kind), by_n in sorted(groups.items()):
        ns = np.array(sorted(by_n), dtype=float)
        means = np.array([np.mean(by_n[n]) for n in sorted(by_n)])
        stds = np.array([np.std(by_n[n]) for n in sorted(by_n)])
        flat_n = [n for n in sorted(by_n) for _ in by_n[n]]
        flat_v = [v for n in sorted(by_n) for v in by_n[n]]
        reg = loglog_regression(flat_n, flat_v) if len(ns) >= 2 and np.all(means > 0) else None
        series.append((f"{method} ({kind})", ns, means, stds, reg))

    positive = [v for _, _, m, s, _ in series for v in np.concatenate([m, m - s, m + s]) if v > 0]
    lx_all = np.log10(np.concatenate([s[1] for s in series]))
    ly_lo, ly_hi = math.log10(min(positive)), math.log10(max(positive))
    lx_lo, lx_hi = float(lx_all.min()), float(lx_all.max())
    if lx_hi == lx_lo:
        lx_lo, lx_hi = lx_lo - 0.5, lx_hi + 0.5
    if ly_hi == ly_lo:
        ly_lo, ly_hi = ly_lo - 0.5, ly_hi + 0.5
    pad_x, pad_y = 0.05 * (lx_hi - lx_lo), 0.05 * (ly_hi - ly_lo)
    lx_lo, lx_hi, ly_lo, ly_hi = lx_lo - pad_x, lx_hi + pad_x, ly_lo - pad_y, ly_hi + pad_y

    cv = _Canvas(title)
    x0, x1, y0, y1 = _frame(cv, "n (log scale)", "value (log scale)")

    def px(lx):
        return x0 + (lx - lx_lo) / (lx_hi - lx_lo) * (x1 - x0)

    def py(ly):
        return y0 - (ly - ly_lo) / (ly_hi - ly_lo) * (y0 - y1)

    for e in range(math.ceil(lx_lo), math.floor(lx_hi) + 1):
        cv.line(px(e), y0, px(e), y0 + 5)
        cv.text(px(e), y0 + 18, f"1e{e}")
    for e in range(math.ceil(ly_lo), math.floor(ly_hi) + 1):
        cv.line(x0 - 5, py(e), x0, py(e))
        cv.text(x0 - 8, py(e) + 4, f"1e{e}", anchor="end")

    for idx, (label, ns, means, stds, reg) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        for n, m, s in zip(ns, means, stds):
            if m - s > 0:
                cv.line(px(math.log10(n)), py(math.log10(m - s)), px(math.log10(n)), py(math.log10(m + s)), color)
            cv.circle(px(math.log10(n)), py(math.log10(m)), 3, color)
        text = label
        if reg is not None:
            ends = np.log(ns[[0, -1]])
            fit = (reg.slope * ends + reg.intercept) / math.log(10)
            cv.line(px(ends[0] / math.log(10)), py(fit[0]), px(ends[1] / math.log(10)), py(fit[1]), color, dash="4 3")
            text += f": slope={reg.slope!r} r2={reg.r2:.4f}"
        cv.text(x1 - 4, y1 + 16 * (idx + 1), text, anchor="end", extra=f' fill="{color}" class="regression"')
    return cv.render()


def bars_svg(records: Sequence[ExperimentRecord], title: str = "") -> str:
    """Grouped bars of the mean value per ``k``, one bar per method."""
    groups = _group(records)
    keys = sorted(groups)
    ks = sorted({k for by_k in groups.values() for k in by_k})
    means = {key: {k: float(np.mean(v)) for k, v in groups[key].items()} for key in keys}
    top = max(max(m.values()) for m in means.values())
    top = top if top > 0 else 1.0

    cv = _Canvas(title)
    x0, x1, y0, y1 = _frame(cv, "k", "mean value")
    slot = (x1 - x0) / len(ks)
    width = 0.8 * slot / len(keys)
    for t in range(6):
        v = top * t / 5
        y = y0 - v / top * (y0 - y1)
        cv.line(x0 - 5, y, x0, y)
        cv.text(x0 - 8, y + 4, f"{v:.3g}", anchor="end")
    for a, k in enumerate(ks):
        cv.text(x0 + (a + 0.5) * slot, y0 + 18, str(k))
        for b, key in enumerate(keys):
            if k not in means[key]:
                continue
            h = means[key][k] / top * (y0 - y1)
            cv.rect(x0 + a * slot + 0.1 * slot + b * width, y0 - h, width, h, PALETTE[b % len(PALETTE)])
    for b, (method, kind) in enumerate(keys):
        cv.text(x1 - 4, y1 + 16 * (b + 1), f"{method} ({kind})", anchor="end",
                extra=f' fill="{PALETTE[b % len(PALETTE)]}"')
    return cv.render()


def plot(csv_path, kind: str, out_svg, title: str | None = None) -> Path:
    """Render ``csv_path`` as a ``loglog`` or ``bars`` figure.

    Raises on a malformed or empty CSV before anything is written.
    """
    records = read_csv(csv_path)
    if not records:
        raise ValueError(f"{csv_path}: no records to plot")
    title = Path(csv_path).stem if title is None else title
    if kind == "loglog":
        svg = loglog_svg(records, title)
    elif kind == "bars":
        svg = bars_svg(records, title)
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    out = Path(out_svg)
    out.write_text(svg, encoding="utf-8")
    return out
