"""Deterministic SVG rendering of 2D polyhedral unions."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from decregions.geometry import Polyhedron, intersect, polygon_vertices

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
SIZE = 480


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def color(index: int) -> str:
    return PALETTE[index % len(PALETTE)]


class Canvas:
    def __init__(self, half_width: float, title: str | None = None):
        self.h = float(half_width)
        self.title = title
        self.items: list[str] = []

    def _xy(self, p) -> tuple[float, float]:
        s = SIZE / (2 * self.h)
        return (p[0] + self.h) * s, (self.h - p[1]) * s

    def polygon(self, P: Polyhedron, fill: str, opacity: float = 0.6) -> None:
        clipped = intersect(P, Polyhedron.box(2, self.h))
        V = polygon_vertices(clipped)
        if len(V) < 3:
            return
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in map(self._xy, V))
        self.items.append(f'<polygon points="{pts}" fill="{fill}" fill-opacity="{opacity}" '
                          f'stroke="#333333" stroke-width="0.5"/>')

    def polyline(self, pts: Sequence, stroke: str = "#000000") -> None:
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in map(self._xy, pts))
        self.items.append(f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
                          f'stroke-width="1.5"/>')

    def render(self) -> str:
        head = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
                f'viewBox="0 0 {SIZE} {SIZE}">',
                f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="#ffffff" stroke="#000000"/>']
        cx, cy = self._xy((0.0, 0.0))
        head.append(f'<line x1="0" y1="{_fmt(cy)}" x2="{SIZE}" y2="{_fmt(cy)}" stroke="#cccccc"/>')
        head.append(f'<line x1="{_fmt(cx)}" y1="0" x2="{_fmt(cx)}" y2="{SIZE}" stroke="#cccccc"/>')
        if self.title:
            head.append(f'<text x="6" y="16" font-size="12" font-family="monospace">'
                        f'{self.title}</text>')
        return "\n".join(head + self.items + ["</svg>"]) + "\n"


def render_union(groups: Iterable[tuple[int, Iterable[Polyhedron]]], half_width: float,
                 title: str | None = None, path=None) -> str:
    """``groups`` pairs a palette index with the polyhedra drawn in it."""
    canvas = Canvas(half_width, title)
    for idx, polys in groups:
        for P in polys:
            if P.dim != 2:
                raise ValueError("SVG export is 2D only")
            canvas.polygon(P, color(idx))
    if path is not None:
        canvas.polyline(np.asarray(path))
    return canvas.render()
