"""Decision-region images as standalone SVG.

Each grid row is run-length encoded so neighbouring cells with the same
label become one rectangle, which keeps files small at fine steps.
"""

import json
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .classifier import predict

REGION_COLORS = ["#aec7e8", "#ffbb78", "#c5b0d5", "#f7b6d2", "#c7c7c7"]
POINT_COLORS = ["#1f77b4", "#ff7f0e", "#9467bd", "#e377c2", "#7f7f7f"]
UNCLASSIFIED_COLOR = "#98df8a"


@dataclass(frozen=True)
class Grid:
    xmin: float = -4.0
    xmax: float = 4.0
    ymin: float = -4.0
    ymax: float = 4.0
    step: float = 0.05

    def __post_init__(self):
        if self.step <= 0 or self.xmax <= self.xmin or self.ymax <= self.ymin:
            raise ValueError("grid needs xmin < xmax, ymin < ymax and step > 0")

    def centers(self):
        xs = np.arange(self.xmin, self.xmax - 1e-12, self.step) + self.step / 2
        ys = np.arange(self.ymin, self.ymax - 1e-12, self.step) + self.step / 2
        return xs, ys


def grid_labels(model, grid: Grid, use_threshold=False) -> np.ndarray:
    """Class index per cell (-1 = unclassified), shape (len(ys), len(xs))."""
    if model.d != 2:
        raise ValueError(f"region plots need a 2-D model, got d={model.d}")
    xs, ys = grid.centers()
    xx, yy = np.meshgrid(xs, ys)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return predict(model, pts, use_threshold).index.reshape(len(ys), len(xs))


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def render_regions(model, grid: Grid, use_threshold=False, points=None, labels=None,
                   metadata=None, size=480) -> str:
    cells = grid_labels(model, grid, use_threshold)
    ny, nx = cells.shape
    sx = size / (grid.xmax - grid.xmin)
    sy = size / (grid.ymax - grid.ymin)
    cw, ch = grid.step * sx, grid.step * sy
    legend_h = 20 * (len(model.classes) + 1) + 10
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + legend_h}" '
        f'viewBox="0 0 {size} {size + legend_h}">',
    ]
    if metadata is not None:
        out.append(f"<metadata>{escape(json.dumps(metadata, sort_keys=True))}</metadata>")
    out.append('<g id="regions" shape-rendering="crispEdges">')
    for r in range(ny):
        # row 0 is the lowest y, drawn at the bottom
        y = size - (r + 1) * ch
        row = cells[r]
        start = 0
        for c in range(1, nx + 1):
            if c == nx or row[c] != row[start]:
                idx = int(row[start])
                color = UNCLASSIFIED_COLOR if idx < 0 else REGION_COLORS[idx % len(REGION_COLORS)]
                out.append(f'<rect x="{_fmt(start * cw)}" y="{_fmt(y)}" width="{_fmt((c - start) * cw)}" '
                           f'height="{_fmt(ch)}" fill="{color}"/>')
                start = c
    out.append("</g>")
    if points is not None:
        out.append('<g id="points">')
        pts = np.asarray(points, dtype=float)
        for p, lab in zip(pts, labels):
            j = model.classes.index(lab) if lab in model.classes else -1
            color = POINT_COLORS[j % len(POINT_COLORS)] if j >= 0 else "#000000"
            px, py = (p[0] - grid.xmin) * sx, size - (p[1] - grid.ymin) * sy
            if 0 <= px <= size and 0 <= py <= size:
                out.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="2.5" fill="{color}" '
                           f'stroke="#000" stroke-width="0.4"/>')
        out.append("</g>")
    out.append('<g id="legend" font-family="sans-serif" font-size="12">')
    entries = [(REGION_COLORS[j % len(REGION_COLORS)], f"class {c}") for j, c in enumerate(model.classes)]
    entries.append((UNCLASSIFIED_COLOR, "unclassified"))
    for i, (color, text) in enumerate(entries):
        y = size + 8 + 20 * i
        out.append(f'<rect x="8" y="{y}" width="14" height="14" fill="{color}" stroke="#333"/>')
        out.append(f'<text x="28" y="{y + 11}">{escape(text)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
