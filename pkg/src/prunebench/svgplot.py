"""Minimal SVG line charts with a logarithmic x axis.

Output is a pure function of the input numbers: coordinates are printed with
fixed precision so the same data always yields the same bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from prunebench.sweep import SweepRow

PANEL_W = 420
PANEL_H = 300
MARGIN = {"left": 60, "right": 20, "top": 40, "bottom": 50}


@dataclass
class Series:
    label: str
    xs: list[float]
    ys: list[float]
    color: str
    dash: str = ""


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def log_ticks(lo: float, hi: float) -> tuple[list[float], list[float]]:
    """Major ticks at powers of ten covering ``[lo, hi]`` and minor ticks at 2..9."""
    a = math.floor(math.log10(lo))
    b = math.ceil(math.log10(hi))
    if a == b:
        b += 1
    major = [10.0 ** k for k in range(a, b + 1)]
    minor = [m * 10.0 ** k for k in range(a, b) for m in range(2, 10)]
    return major, minor


class _Panel:
    def __init__(self, x0: float, y0: float, xlim, ylim):
        self.x0, self.y0 = x0, y0
        self.w = PANEL_W - MARGIN["left"] - MARGIN["right"]
        self.h = PANEL_H - MARGIN["top"] - MARGIN["bottom"]
        self.lx = (math.log10(xlim[0]), math.log10(xlim[1]))
        self.ylim = ylim

    def px(self, x: float) -> float:
        t = (math.log10(x) - self.lx[0]) / (self.lx[1] - self.lx[0])
        return self.x0 + MARGIN["left"] + t * self.w

    def py(self, y: float) -> float:
        t = (y - self.ylim[0]) / (self.ylim[1] - self.ylim[0])
        return self.y0 + MARGIN["top"] + (1 - t) * self.h


def _panel_svg(panel: _Panel, title: str, xlabel: str, ylabel: str, series: list[Series],
               major, minor, yticks) -> list[str]:
    left = panel.x0 + MARGIN["left"]
    top = panel.y0 + MARGIN["top"]
    bottom = top + panel.h
    right = left + panel.w
    out = [f'<rect x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(panel.w)}" '
           f'height="{_fmt(panel.h)}" fill="none" stroke="black"/>']
    for x in minor:
        if panel.lx[0] <= math.log10(x) <= panel.lx[1]:
            X = _fmt(panel.px(x))
            out.append(f'<line x1="{X}" y1="{_fmt(bottom)}" x2="{X}" y2="{_fmt(bottom - 4)}" '
                       'stroke="black"/>')
    for x in major:
        if panel.lx[0] <= math.log10(x) <= panel.lx[1]:
            X = _fmt(panel.px(x))
            out.append(f'<line x1="{X}" y1="{_fmt(top)}" x2="{X}" y2="{_fmt(bottom)}" '
                       'stroke="#dddddd"/>')
            k = round(math.log10(x))
            out.append(f'<text x="{X}" y="{_fmt(bottom + 18)}" text-anchor="middle" '
                       f'font-size="12">10<tspan dy="-5" font-size="9">{k}</tspan></text>')
    for y in yticks:
        Y = _fmt(panel.py(y))
        out.append(f'<line x1="{_fmt(left)}" y1="{Y}" x2="{_fmt(right)}" y2="{Y}" stroke="#dddddd"/>')
        out.append(f'<text x="{_fmt(left - 6)}" y="{Y}" text-anchor="end" '
                   f'dominant-baseline="middle" font-size="12">{y:.1f}</text>')
    out.append(f'<text x="{_fmt((left + right) / 2)}" y="{_fmt(panel.y0 + 24)}" '
               f'text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<text x="{_fmt((left + right) / 2)}" y="{_fmt(bottom + 40)}" '
               f'text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    cy = (top + bottom) / 2
    cx = panel.x0 + 16
    out.append(f'<text x="{_fmt(cx)}" y="{_fmt(cy)}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 {_fmt(cx)} {_fmt(cy)})">{escape(ylabel)}</text>')

    for i, s in enumerate(series):
        pts = [(panel.px(x), panel.py(y)) for x, y in zip(s.xs, s.ys)
               if x > 0 and not math.isnan(y)]
        dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
        if pts:
            path = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{s.color}" '
                       f'stroke-width="2"{dash}/>')
            out.extend(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="{s.color}"/>'
                       for x, y in pts)
        ly = top + 12 + 18 * i
        out.append(f'<line x1="{_fmt(left + 10)}" y1="{_fmt(ly)}" x2="{_fmt(left + 34)}" '
                   f'y2="{_fmt(ly)}" stroke="{s.color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{_fmt(left + 40)}" y="{_fmt(ly)}" dominant-baseline="middle" '
                   f'font-size="12">{escape(s.label)}</text>')
    return out


def line_charts(panels: list[tuple[str, list[Series]]], xlabel: str, ylabel: str,
                ylim=(0.0, 1.0), title: str = "") -> str:
    """Side-by-side panels sharing one log-scaled x range."""
    xs = [x for _, series in panels for s in series for x in s.xs if x > 0]
    if not xs:
        xs = [1.0, 10.0]
    lo, hi = min(xs), max(xs)
    major, minor = log_ticks(lo, hi)
    xlim = (major[0], major[-1])
    yticks = [ylim[0] + k * (ylim[1] - ylim[0]) / 5 for k in range(6)]
    head = 30 if title else 0
    width = PANEL_W * len(panels)
    height = PANEL_H + head
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<text x="{_fmt(width / 2)}" y="20" text-anchor="middle" '
                   f'font-size="15">{escape(title)}</text>')
    for i, (ptitle, series) in enumerate(panels):
        panel = _Panel(i * PANEL_W, head, xlim, ylim)
        out.extend(_panel_svg(panel, ptitle, xlabel, ylabel, series, major, minor, yticks))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sweep_svg(rows: list[SweepRow], title: str = "") -> str:
    """Train and test panels, accuracy vs nonzero weights (log), std vs renormalized."""
    rows = sorted((r for r in rows if r.valid), key=lambda r: r.nnz)
    nnz = [float(r.nnz) for r in rows]
    panels = []
    for split in ("train", "test"):
        panels.append((f"{split} accuracy", [
            Series("standard", nnz, [getattr(r, f"{split}_acc_std") for r in rows],
                   "#d62728", "6,3"),
            Series("renormalized", nnz, [getattr(r, f"{split}_acc_renorm") for r in rows],
                   "#1f77b4"),
        ]))
    return line_charts(panels, "nonzero weights in pruned layer", "accuracy", title=title)
