"""Minimal self-contained SVG line charts for traces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from ..protocol import Trace

SERIES = ("residual", "states", "momenta", "feas_gap")

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 70, 20, 30, 45
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
_MAX_POINTS = 1500


class PlotError(ValueError):
    pass


@dataclass(frozen=True)
class PlotSpec:
    series: str = "residual"
    log: bool = False
    title: str = ""
    xlabel: str = "k"
    ylabel: str = ""

    def __post_init__(self):
        if self.series not in SERIES:
            raise PlotError(f"unknown series {self.series!r}; expected one of {SERIES}")


def _columns(trace: Trace, series: str) -> list[tuple[str, np.ndarray, dict]]:
    if series == "residual":
        if trace.residual is None:
            raise PlotError("trace has no residual column; run it against an oracle first")
        return [("residual", trace.residual, {})]
    if series == "feas_gap":
        return [("feas_gap", trace.feas_gap, {})]
    data = trace.x if series == "states" else trace.y
    lines = [(f"{'x' if series == 'states' else 'y'}_{i}", data[:, i], {"width": 0.8})
             for i in range(data.shape[1])]
    if series == "states":
        lines.append(("average", data.mean(axis=1), {"width": 2.0, "color": "#000000",
                                                      "dash": "6,3"}))
    return lines


def _thin(k: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if k.size <= _MAX_POINTS:
        return k, v
    idx = np.unique(np.linspace(0, k.size - 1, _MAX_POINTS).round().astype(int))
    return k[idx], v[idx]


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / count))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= count:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _render(lines: list[tuple[str, np.ndarray, np.ndarray, dict]], spec: PlotSpec) -> str:
    ks = np.concatenate([k for _, k, _, _ in lines]).astype(float)
    vs = np.concatenate([v for _, _, v, _ in lines]).astype(float)
    vs = vs[np.isfinite(vs)]
    if vs.size == 0:
        raise PlotError("no finite values to plot")
    if spec.log:
        pos = vs[vs > 0]
        floor = pos.min() if pos.size else 1e-16
        vs = np.log10(np.maximum(vs, floor))
    x0, x1 = float(ks.min()), float(ks.max())
    y0, y1 = float(vs.min()), float(vs.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def sx(k):
        return _ML + (k - x0) / (x1 - x0) * pw

    def sy(v):
        return _MT + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="#ffffff"/>',
           f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" stroke="#333333"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{sx(t):.2f}" y1="{_MT + ph}" x2="{sx(t):.2f}" y2="{_MT + ph + 4}" '
                   'stroke="#333333"/>')
        out.append(f'<text x="{sx(t):.2f}" y="{_MT + ph + 16}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        label = f"1e{t:g}" if spec.log else f"{t:.4g}"
        out.append(f'<line x1="{_ML - 4}" y1="{sy(t):.2f}" x2="{_ML}" y2="{sy(t):.2f}" '
                   'stroke="#333333"/>')
        out.append(f'<text x="{_ML - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{_ML + pw / 2:.1f}" y="{_H - 8}" text-anchor="middle">{spec.xlabel}</text>')
    if spec.ylabel:
        out.append(f'<text x="14" y="{_MT + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {_MT + ph / 2:.1f})">{spec.ylabel}</text>')
    if spec.title:
        out.append(f'<text x="{_ML + pw / 2:.1f}" y="18" text-anchor="middle" '
                   f'font-size="13">{spec.title}</text>')

    legend = len(lines) <= 10
    for idx, (name, k, v, style) in enumerate(lines):
        v = np.asarray(v, dtype=float)
        if spec.log:
            v = np.log10(np.maximum(v, 10.0**y0))
        color = style.get("color", _COLORS[idx % len(_COLORS)])
        width = style.get("width", 1.5)
        dash = f' stroke-dasharray="{style["dash"]}"' if "dash" in style else ""
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(k, v) if np.isfinite(b))
        if len(k) == 1:
            out.append(f'<circle cx="{sx(k[0]):.2f}" cy="{sy(v[0]):.2f}" r="2.5" fill="{color}"/>')
        else:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{dash} '
                       f'points="{pts}"/>')
        if legend:
            ly = _MT + 12 + 14 * idx
            out.append(f'<line x1="{_ML + pw - 110}" y1="{ly - 4}" x2="{_ML + pw - 92}" '
                       f'y2="{ly - 4}" stroke="{color}" stroke-width="2"{dash}/>')
            out.append(f'<text x="{_ML + pw - 88}" y="{ly}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(trace: Trace, spec: PlotSpec, path) -> Path:
    """Write one trace's chosen series as an SVG line chart."""
    if len(trace.k) == 0:
        raise PlotError("empty trace")
    lines = []
    for name, v, style in _columns(trace, spec.series):
        k, vv = _thin(np.asarray(trace.k), np.asarray(v))
        lines.append((name, k, vv, style))
    if not spec.ylabel:
        spec = PlotSpec(spec.series, spec.log, spec.title, spec.xlabel, spec.series)
    path = Path(path)
    path.write_text(_render(lines, spec))
    return path


def emit_comparison(traces: Mapping[str, Trace], spec: PlotSpec, path) -> Path:
    """Overlay a scalar series (residual or feas_gap) from several traces."""
    if spec.series not in ("residual", "feas_gap"):
        raise PlotError("comparisons only overlay scalar series")
    if not traces:
        raise PlotError("nothing to compare")
    lines = []
    for label, tr in traces.items():
        if len(tr.k) == 0:
            raise PlotError(f"empty trace {label!r}")
        (_, v, _), = _columns(tr, spec.series)
        k, vv = _thin(np.asarray(tr.k), np.asarray(v))
        lines.append((label, k, vv, {}))
    if not spec.ylabel:
        spec = PlotSpec(spec.series, spec.log, spec.title, spec.xlabel, spec.series)
    path = Path(path)
    path.write_text(_render(lines, spec))
    return path
