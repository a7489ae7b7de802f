"""CSV and SVG serialization of series bundles."""

from __future__ import annotations

from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .errors import InvalidArgument
from .experiments import TimeSeries

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _check(series: Sequence[TimeSeries]):
    if not series:
        raise InvalidArgument("nothing to write: empty bundle")
    t = series[0].times
    for s in series[1:]:
        if s.times.shape != t.shape or np.any(s.times != t):
            raise InvalidArgument("all curves must share one time grid")
    labels = [s.label for s in series]
    if len(set(labels)) != len(labels) or any(not l or "," in l for l in labels):
        raise InvalidArgument("curve labels must be distinct, non-empty and comma-free")


def format_csv(series: Sequence[TimeSeries], metadata: Mapping[str, object] = ()) -> str:
    """``# key=value`` lines, header ``t,<labels>``, one row per sample."""
    _check(series)
    lines = [f"# {k}={v}" for k, v in dict(metadata).items()]
    lines.append(",".join(["t"] + [s.label for s in series]))
    cols = [series[0].times] + [s.values for s in series]
    for row in zip(*cols):
        lines.append(",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def emit_csv(series: Sequence[TimeSeries], path, metadata: Mapping[str, object] = ()) -> None:
    text = format_csv(series, metadata)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)


def read_csv(path) -> Tuple[Dict[str, str], List[TimeSeries]]:
    meta: Dict[str, str] = {}
    header = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            elif header is None:
                header = line.split(",")
                if header[0] != "t" or len(header) < 2:
                    raise InvalidArgument(f"line {ln}: header must start with 't' and name a curve")
            else:
                try:
                    row = [float(x) for x in line.split(",")]
                except ValueError:
                    raise InvalidArgument(f"line {ln}: non-numeric entry") from None
                if len(row) != len(header):
                    raise InvalidArgument(f"line {ln}: expected {len(header)} columns")
                rows.append(row)
    if header is None or not rows:
        raise InvalidArgument("CSV holds no data")
    data = np.array(rows)
    return meta, [TimeSeries(data[:, 0], data[:, k], None, header[k]) for k in range(1, len(header))]


def format_svg(series: Sequence[TimeSeries], log_y: bool = False, title: str = "",
               width: int = 640, height: int = 420) -> str:
    """Line plot with one polyline per curve and labelled axes."""
    _check(series)
    left, right, top, bottom = 70, 20, 30, 50
    pw, ph = width - left - right, height - top - bottom
    t = series[0].times
    ys = []
    for s in series:
        v = s.values
        if log_y:
            with np.errstate(divide="ignore"):
                v = np.log10(np.where(v > 0, v, np.nan))
        ys.append(v)
    finite = np.concatenate([y[np.isfinite(y)] for y in ys])
    ylo, yhi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    tlo, thi = float(t[0]), float(t[-1])
    tspan = (thi - tlo) or 1.0

    def px(x):
        return left + (x - tlo) / tspan * pw

    def py(y):
        return top + (yhi - y) / (yhi - ylo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    if title:
        out.append(f'<text x="{width / 2}" y="18" text-anchor="middle">{title}</text>')
    for k in range(5):
        x = tlo + k * tspan / 4
        y = ylo + k * (yhi - ylo) / 4
        out.append(f'<text x="{px(x):.1f}" y="{top + ph + 16}" text-anchor="middle">{x:.3g}</text>')
        out.append(f'<text x="{left - 6}" y="{py(y) + 4:.1f}" text-anchor="end">{y:.3g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">t (s)</text>')
    ylab = "log10(value)" if log_y else "value"
    out.append(f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2})">{ylab}</text>')
    for i, (s, y) in enumerate(zip(series, ys)):
        color = COLORS[i % len(COLORS)]
        ok = np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(t[ok], y[ok]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{left + pw - 4}" y="{top + 16 + 14 * i}" text-anchor="end" fill="{color}">{s.label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(series: Sequence[TimeSeries], path, log_y: bool = False, title: str = "") -> None:
    text = format_svg(series, log_y, title)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)
