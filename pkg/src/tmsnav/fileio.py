"""Deterministic file emission: canonical JSON, CSV tables, SVG plots.

Every writer here is byte-stable: identical inputs produce identical
bytes, which the command-line layer relies on for reproducibility.
"""

from __future__ import annotations

import json
from pathlib import Path


def canonical_json(obj) -> str:
    """JSON text with sorted keys and a trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(canonical_json(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def format_float(x: float) -> str:
    """Shortest round-trip decimal form (repr of a Python float)."""
    return repr(float(x))


def write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            format_float(v) if isinstance(v, float) else str(v) for v in row
        ))
    Path(path).write_text("\n".join(lines) + "\n")


def polyline_svg(series: dict[str, list[float]], x_values: list[float],
                 title: str = "", width: int = 640, height: int = 360) -> str:
    """Plain polyline plot of named series over shared x values."""
    margin = 40.0
    xs = [float(x) for x in x_values]
    all_y = [float(v) for ys in series.values() for v in ys]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(all_y), max(all_y)
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0

    def sx(x):
        return margin + (x - x_lo) / x_span * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y_lo) / y_span * (height - 2 * margin)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]
    for i, (name, ys) in enumerate(sorted(series.items())):
        color = palette[i % len(palette)]
        points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        parts.append(
            f'<text x="{width - margin + 4}" y="{30 + 16 * i}" fill="{color}" '
            f'font-family="sans-serif" font-size="11">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
