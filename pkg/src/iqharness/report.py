"""Static SVG and HTML rendering for statistics exports and run plots.

Everything here is dependency-free string assembly.  Plot elements carry
``data-*`` attributes (bin counts, point coordinates) so tests and scripts
can introspect rendered values without parsing pixel output.
"""
from __future__ import annotations

import html

SVG_W = 640
SVG_H = 360
MARGIN_L = 56
MARGIN_R = 16
MARGIN_T = 34
MARGIN_B = 46

_AXIS_STYLE = "stroke:#444;stroke-width:1"
_GRID_STYLE = "stroke:#ddd;stroke-width:1"
_BAR_STYLE = "fill:#4878a8;stroke:#2b4a68;stroke-width:0.5"
_TEXT = 'font-family="sans-serif" font-size="11" fill="#222"'


def _fmt(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return f"{value:.4g}"


def _svg_open(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" '
        f'height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">',
        f'<rect width="{SVG_W}" height="{SVG_H}" fill="white"/>',
        f'<text x="{SVG_W / 2}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14" fill="#111">'
        f"{html.escape(title)}</text>",
    ]


def histogram_svg(
    title: str,
    edges: list[float],
    counts: list[int],
    *,
    underflow: int = 0,
    overflow: int = 0,
    x_label: str = "",
) -> str:
    """Bar chart of binned counts; outlier bins drawn hatched at the ends."""
    bars: list[tuple[str, int]] = []
    if underflow:
        bars.append((f"< {_fmt(edges[0])}", underflow))
    for i, count in enumerate(counts):
        bars.append((f"{_fmt(edges[i])}", count))
    if overflow:
        bars.append((f"> {_fmt(edges[-1])}", overflow))

    plot_w = SVG_W - MARGIN_L - MARGIN_R
    plot_h = SVG_H - MARGIN_T - MARGIN_B
    peak = max([c for _, c in bars] + [1])
    n = len(bars)
    bw = plot_w / max(n, 1)

    parts = _svg_open(title)
    parts.append(
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T + plot_h}" '
        f'x2="{MARGIN_L + plot_w}" y2="{MARGIN_T + plot_h}" style="{_AXIS_STYLE}"/>'
    )
    parts.append(
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" '
        f'y2="{MARGIN_T + plot_h}" style="{_AXIS_STYLE}"/>'
    )
    for i, (label, count) in enumerate(bars):
        h = plot_h * count / peak
        x = MARGIN_L + i * bw
        y = MARGIN_T + plot_h - h
        parts.append(
            f'<rect x="{x + 1:.2f}" y="{y:.2f}" width="{max(bw - 2, 1):.2f}" '
            f'height="{h:.2f}" style="{_BAR_STYLE}" data-count="{count}" '
            f'data-bin="{html.escape(label)}"/>'
        )
        if n <= 26 or i % max(1, n // 13) == 0:
            parts.append(
                f'<text x="{x + bw / 2:.2f}" y="{MARGIN_T + plot_h + 14}" '
                f'text-anchor="middle" {_TEXT}>{html.escape(label)}</text>'
            )
    for frac in (0.0, 0.5, 1.0):
        y = MARGIN_T + plot_h * (1 - frac)
        parts.append(
            f'<text x="{MARGIN_L - 6}" y="{y + 4:.2f}" text-anchor="end" '
            f"{_TEXT}>{_fmt(peak * frac)}</text>"
        )
    if x_label:
        parts.append(
            f'<text x="{MARGIN_L + plot_w / 2}" y="{SVG_H - 8}" '
            f'text-anchor="middle" {_TEXT}>{html.escape(x_label)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def line_plot_svg(
    title: str,
    x_label: str,
    y_label: str,
    points: list[tuple[object, float, float, float]],
    *,
    categorical: bool = False,
) -> str:
    """Mean line with min-max whiskers over grouped x positions.

    ``points`` is [(x, mean, low, high)] already sorted; x values are plotted
    at equal spacing when ``categorical`` is true, at their numeric position
    otherwise.
    """
    plot_w = SVG_W - MARGIN_L - MARGIN_R
    plot_h = SVG_H - MARGIN_T - MARGIN_B

    if categorical:
        xs = list(range(len(points)))
    else:
        xs = [float(p[0]) for p in points]
    ys = [v for p in points for v in (p[1], p[2], p[3])]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y_lo, y_hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.06 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    def px(x: float) -> float:
        return MARGIN_L + plot_w * (x - x_lo) / (x_hi - x_lo)

    def py(y: float) -> float:
        return MARGIN_T + plot_h * (1 - (y - y_lo) / (y_hi - y_lo))

    parts = _svg_open(title)
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        gy = MARGIN_T + plot_h * frac
        parts.append(
            f'<line x1="{MARGIN_L}" y1="{gy:.2f}" x2="{MARGIN_L + plot_w}" '
            f'y2="{gy:.2f}" style="{_GRID_STYLE}"/>'
        )
        value = y_hi - (y_hi - y_lo) * frac
        parts.append(
            f'<text x="{MARGIN_L - 6}" y="{gy + 4:.2f}" text-anchor="end" '
            f"{_TEXT}>{_fmt(value)}</text>"
        )
    parts.append(
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T + plot_h}" '
        f'x2="{MARGIN_L + plot_w}" y2="{MARGIN_T + plot_h}" style="{_AXIS_STYLE}"/>'
    )
    parts.append(
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" '
        f'y2="{MARGIN_T + plot_h}" style="{_AXIS_STYLE}"/>'
    )

    coords = []
    for i, (x_raw, mean, lo, hi) in enumerate(points):
        x = px(xs[i])
        parts.append(
            f'<line x1="{x:.2f}" y1="{py(lo):.2f}" x2="{x:.2f}" '
            f'y2="{py(hi):.2f}" style="stroke:#a04040;stroke-width:1.5" '
            f'data-low="{lo!r}" data-high="{hi!r}"/>'
        )
        coords.append((x, py(mean)))
        parts.append(
            f'<circle cx="{x:.2f}" cy="{py(mean):.2f}" r="3.5" fill="#2b4a68" '
            f'data-x="{html.escape(str(x_raw))}" data-y="{mean!r}"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{MARGIN_T + plot_h + 14}" '
            f'text-anchor="middle" {_TEXT}>{html.escape(str(x_raw))}</text>'
        )
    if len(coords) >= 2:
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
        parts.append(
            f'<polyline points="{path}" fill="none" '
            'style="stroke:#2b4a68;stroke-width:1.5"/>'
        )
    parts.append(
        f'<text x="{MARGIN_L + plot_w / 2}" y="{SVG_H - 8}" '
        f'text-anchor="middle" {_TEXT}>{html.escape(x_label)}</text>'
    )
    parts.append(
        f'<text x="14" y="{MARGIN_T + plot_h / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {MARGIN_T + plot_h / 2})" {_TEXT}>'
        f"{html.escape(y_label)}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def html_page(title: str, body: str) -> str:
    return (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        f"<title>{html.escape(title)}</title>"
        "<style>body{font-family:sans-serif;margin:24px;color:#222}"
        "table{border-collapse:collapse}"
        "td,th{border:1px solid #bbb;padding:4px 10px;font-size:13px}"
        "th{background:#eef2f6}img{margin:2px}"
        ".grid{display:flex;flex-wrap:wrap}</style></head>\n"
        f"<body>\n<h1>{html.escape(title)}</h1>\n{body}\n</body></html>\n"
    )


def table_html(headers: list[str], rows: list[list[object]]) -> str:
    parts = ["<table>", "<tr>"]
    parts.extend(f"<th>{html.escape(str(h))}</th>" for h in headers)
    parts.append("</tr>")
    for row in rows:
        parts.append("<tr>")
        for cell in row:
            if isinstance(cell, float):
                cell = _fmt(cell)
            parts.append(f"<td>{html.escape(str(cell))}</td>")
        parts.append("</tr>")
    parts.append("</table>")
    return "".join(parts)
