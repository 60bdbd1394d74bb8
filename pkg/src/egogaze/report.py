"""Deterministic report emitters: CSV tables, minimal SVG plots, and run
manifests. Identical inputs produce byte-identical files."""

import csv
import json
from pathlib import Path

import numpy as np
import scipy

SVG_WIDTH = 640
SVG_HEIGHT = 360
MARGIN = 50


def _fmt(value):
    return format(float(value), ".6g")


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_manifest(path, command, config, seed):
    """Record everything needed to replay a run. No timestamps: manifests of
    identical runs must match byte for byte."""
    from . import __version__

    payload = {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": {
            "egogaze": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def _svg_document(body, title):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" '
        f'height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<text x="{SVG_WIDTH / 2:.0f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]
    parts.extend(body)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def svg_bar_chart(labels, values, title=""):
    """Vertical bar chart; bars are evenly spaced over the plot area."""
    if len(labels) != len(values) or not labels:
        raise ValueError("labels and values must be non-empty and aligned")
    values = [float(v) for v in values]
    top = max(max(values), 0.0)
    bottom = min(min(values), 0.0)
    span = (top - bottom) or 1.0
    plot_w = SVG_WIDTH - 2 * MARGIN
    plot_h = SVG_HEIGHT - 2 * MARGIN
    slot = plot_w / len(values)
    bar_w = slot * 0.7
    body = []
    zero_y = MARGIN + (top - 0.0) / span * plot_h
    body.append(
        f'<line x1="{MARGIN}" y1="{_fmt(zero_y)}" x2="{SVG_WIDTH - MARGIN}" '
        f'y2="{_fmt(zero_y)}" stroke="black"/>'
    )
    for i, (label, value) in enumerate(zip(labels, values)):
        x = MARGIN + i * slot + (slot - bar_w) / 2
        y_val = MARGIN + (top - value) / span * plot_h
        y0 = min(y_val, zero_y)
        height = abs(y_val - zero_y)
        body.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y0)}" width="{_fmt(bar_w)}" '
            f'height="{_fmt(height)}" fill="steelblue"/>'
        )
        body.append(
            f'<text x="{_fmt(x + bar_w / 2)}" y="{SVG_HEIGHT - MARGIN + 15}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="10">{label}</text>'
        )
        body.append(
            f'<text x="{_fmt(x + bar_w / 2)}" y="{_fmt(y0 - 4)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="9">{_fmt(value)}</text>'
        )
    return _svg_document(body, title)


def svg_line_chart(series, title="", x_label="", y_label=""):
    """Line chart for {name: (xs, ys)} series sharing one axis frame."""
    if not series:
        raise ValueError("need at least one series")
    all_x = [x for xs, _ in series.values() for x in xs]
    all_y = [y for _, ys in series.values() for y in ys]
    if not all_x:
        raise ValueError("series must contain points")
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0
    plot_w = SVG_WIDTH - 2 * MARGIN
    plot_h = SVG_HEIGHT - 2 * MARGIN
    colors = ("steelblue", "firebrick", "seagreen", "darkorange", "purple")
    body = [
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="black"/>'
    ]
    for i, (name, (xs, ys)) in enumerate(sorted(series.items())):
        color = colors[i % len(colors)]
        points = " ".join(
            f"{_fmt(MARGIN + (x - x_lo) / x_span * plot_w)},"
            f"{_fmt(MARGIN + (y_hi - y) / y_span * plot_h)}"
            for x, y in zip(xs, ys)
        )
        body.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        body.append(
            f'<text x="{SVG_WIDTH - MARGIN + 5}" y="{MARGIN + 15 * i + 10}" '
            f'font-family="sans-serif" font-size="10" fill="{color}">{name}</text>'
        )
    body.append(
        f'<text x="{SVG_WIDTH / 2:.0f}" y="{SVG_HEIGHT - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">{x_label}</text>'
    )
    body.append(
        f'<text x="15" y="{SVG_HEIGHT / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11" '
        f'transform="rotate(-90 15 {SVG_HEIGHT / 2:.0f})">{y_label}</text>'
    )
    return _svg_document(body, title)


def svg_heat_grid(matrix, row_labels, col_labels, title=""):
    """Heat grid with axis labels; cell shade scales with value."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.size == 0:
        raise ValueError("matrix must be non-empty and 2-D")
    finite = matrix[np.isfinite(matrix)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    span = (hi - lo) or 1.0
    rows, cols = matrix.shape
    plot_w = SVG_WIDTH - 2 * MARGIN
    plot_h = SVG_HEIGHT - 2 * MARGIN
    cell_w = plot_w / cols
    cell_h = plot_h / rows
    body = []
    for i in range(rows):
        for j in range(cols):
            value = matrix[i, j]
            if np.isfinite(value):
                shade = int(round(235 - (value - lo) / span * 180))
                fill = f"rgb({shade},{shade},255)"
                text = _fmt(value)
            else:
                fill = "rgb(200,200,200)"
                text = "n/a"
            x = MARGIN + j * cell_w
            y = MARGIN + i * cell_h
            body.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cell_w)}" '
                f'height="{_fmt(cell_h)}" fill="{fill}" stroke="white"/>'
            )
            body.append(
                f'<text x="{_fmt(x + cell_w / 2)}" y="{_fmt(y + cell_h / 2 + 3)}" '
                f'text-anchor="middle" font-family="sans-serif" font-size="9">{text}</text>'
            )
    for i, label in enumerate(row_labels):
        body.append(
            f'<text x="{MARGIN - 5}" y="{_fmt(MARGIN + (i + 0.5) * cell_h + 3)}" '
            f'text-anchor="end" font-family="sans-serif" font-size="10">{label}</text>'
        )
    for j, label in enumerate(col_labels):
        body.append(
            f'<text x="{_fmt(MARGIN + (j + 0.5) * cell_w)}" y="{MARGIN - 8}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="10">{label}</text>'
        )
    return _svg_document(body, title)


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
