"""Minimal deterministic SVG output for experiment reports.

No plotting dependency: the few chart kinds needed here are a page of SVG
primitives. Output is a pure function of the report (fixed canvas, fixed
number formatting, no ids or timestamps), so files diff cleanly across
runs.
"""

from __future__ import annotations

from .errors import ConfigError

WIDTH = 640
HEIGHT = 400
MARGIN = 52

KINDS = ("scatter", "histogram", "line")


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def _axes(x_label: str, y_label: str, x_lo, x_hi, y_lo, y_hi) -> list:
    left, right = MARGIN, WIDTH - MARGIN
    top, bottom = MARGIN, HEIGHT - MARGIN
    parts = [
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" '
        'stroke="black" stroke-width="1"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" '
        'stroke="black" stroke-width="1"/>',
        f'<text x="{(left + right) // 2}" y="{HEIGHT - 12}" font-size="13" '
        f'text-anchor="middle" font-family="monospace">{x_label}</text>',
        f'<text x="16" y="{(top + bottom) // 2}" font-size="13" '
        f'text-anchor="middle" font-family="monospace" '
        f'transform="rotate(-90 16 {(top + bottom) // 2})">{y_label}</text>',
        f'<text x="{left}" y="{bottom + 18}" font-size="11" text-anchor="middle" '
        f'font-family="monospace">{_fmt(x_lo)}</text>',
        f'<text x="{right}" y="{bottom + 18}" font-size="11" text-anchor="middle" '
        f'font-family="monospace">{_fmt(x_hi)}</text>',
        f'<text x="{left - 6}" y="{bottom + 4}" font-size="11" text-anchor="end" '
        f'font-family="monospace">{_fmt(y_lo)}</text>',
        f'<text x="{left - 6}" y="{top + 4}" font-size="11" text-anchor="end" '
        f'font-family="monospace">{_fmt(y_hi)}</text>',
    ]
    return parts


def _scale(value, lo, hi, out_lo, out_hi):
    if hi == lo:
        return (out_lo + out_hi) / 2.0
    return out_lo + (value - lo) * (out_hi - out_lo) / (hi - lo)


def emit_svg(report, kind: str, path) -> None:
    """Write one chart of the report's per-trial quotients.

    scatter: quotient against trial index. histogram: 20-bin count profile.
    line: sorted quotients (an empirical profile curve). Reports without
    records cannot be plotted.
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}, expected one of {KINDS}")
    records = list(report.records)
    if not records:
        raise ConfigError("report has no per-trial records to plot")
    xs = [float(rec.trial) for rec in records]
    ys = [float(rec.quotient) for rec in records]
    title = f"{report.kind}: {len(records)} trials"
    left, right = MARGIN, WIDTH - MARGIN
    top, bottom = MARGIN, HEIGHT - MARGIN
    body = []

    if kind == "scatter":
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(0.0, min(ys)), max(ys)
        body += _axes("trial", "quotient", x_lo, x_hi, y_lo, y_hi)
        for x, y in zip(xs, ys):
            cx = _scale(x, x_lo, x_hi, left, right)
            cy = _scale(y, y_lo, y_hi, bottom, top)
            body.append(
                f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="2.5" '
                'fill="steelblue" fill-opacity="0.7"/>'
            )
    elif kind == "histogram":
        y_lo, y_hi = min(ys), max(ys)
        if y_hi == y_lo:
            y_hi = y_lo + 1.0
        nbins = 20
        counts = [0] * nbins
        span = y_hi - y_lo
        for y in ys:
            b = min(int((y - y_lo) / span * nbins), nbins - 1)
            counts[b] += 1
        c_hi = max(counts)
        body += _axes("quotient", "count", y_lo, y_hi, 0, c_hi)
        bar_w = (right - left) / nbins
        for b, count in enumerate(counts):
            if count == 0:
                continue
            h = _scale(count, 0, c_hi, 0, bottom - top)
            body.append(
                f'<rect x="{_fmt(left + b * bar_w + 1)}" y="{_fmt(bottom - h)}" '
                f'width="{_fmt(bar_w - 2)}" height="{_fmt(h)}" fill="steelblue"/>'
            )
    else:  # line
        ys_sorted = sorted(ys)
        x_lo, x_hi = 0.0, float(len(ys_sorted) - 1) if len(ys_sorted) > 1 else 1.0
        y_lo, y_hi = min(0.0, ys_sorted[0]), ys_sorted[-1]
        body += _axes("rank", "quotient", x_lo, x_hi, y_lo, y_hi)
        points = " ".join(
            f"{_fmt(_scale(i, x_lo, x_hi, left, right))},"
            f"{_fmt(_scale(y, y_lo, y_hi, bottom, top))}"
            for i, y in enumerate(ys_sorted)
        )
        body.append(
            f'<polyline points="{points}" fill="none" stroke="steelblue" '
            'stroke-width="1.5"/>'
        )

    body.append(
        f'<text x="{WIDTH // 2}" y="24" font-size="14" text-anchor="middle" '
        f'font-family="monospace">{title}</text>'
    )
    with open(path, "w") as fh:
        fh.write(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">\n'
        )
        for piece in body:
            fh.write("  " + piece + "\n")
        fh.write("</svg>\n")
