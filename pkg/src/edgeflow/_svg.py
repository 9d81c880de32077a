"""Tiny deterministic SVG writer for spectrum diagrams.

Hand-rolled on purpose: the artifact promises byte-stable exports, so
every element is emitted in construction order with fixed-format
coordinates and no library-dependent attributes.
"""
import numpy as np

WIDTH = 640
HEIGHT = 480
LEFT, RIGHT, TOP, BOTTOM = 56.0, 16.0, 20.0, 40.0

PALETTE = ("#c03028", "#2858c0", "#208040", "#b07818", "#703898", "#188088")
MARKER_FILL = {"edge": "#202020", "bulk": "#a0a0a0", "spurious": "#d0a0a0"}


def _fmt(v):
    return f"{float(v):.2f}"


def _mapper(lo, hi, a, b):
    span = (hi - lo) or 1.0

    def to_px(v):
        return a + (v - lo) * (b - a) / span

    return to_px


def spectrum_diagram_svg(x_values, ess_intervals, curves, window,
                         x_label="k", y_label="E", markers=()):
    """Spectrum diagram: gray essential bands per abscissa, colored curves.

    x_values: abscissae; ess_intervals: per abscissa, a sequence of
    (lo, hi) energy intervals shaded gray; curves: sequence of (m, 2)
    point arrays drawn as colored polylines; window: (E_lo, E_hi) view
    range; markers: (x, energy, class) dots under the curves.
    """
    x_values = np.asarray(x_values, float)
    x_lo, x_hi = float(x_values.min()), float(x_values.max())
    y_lo, y_hi = float(window[0]), float(window[1])
    to_x = _mapper(x_lo, x_hi, LEFT, WIDTH - RIGHT)
    to_y = _mapper(y_lo, y_hi, HEIGHT - BOTTOM, TOP)
    if x_values.size > 1:
        half = 0.5 * float(np.median(np.diff(np.sort(x_values))))
    else:
        half = 0.5 * ((x_hi - x_lo) or 1.0)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
           f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" '
           f'fill="#ffffff"/>']
    for xv, intervals in zip(x_values, ess_intervals):
        px0 = max(to_x(xv - half), LEFT)
        px1 = min(to_x(xv + half), WIDTH - RIGHT)
        for lo, hi in intervals:
            lo, hi = max(float(lo), y_lo), min(float(hi), y_hi)
            if hi <= lo:
                continue
            out.append(f'<rect x="{_fmt(px0)}" y="{_fmt(to_y(hi))}" '
                       f'width="{_fmt(px1 - px0)}" '
                       f'height="{_fmt(to_y(lo) - to_y(hi))}" '
                       f'fill="#d8d8d8"/>')
    for xv, ev, cls in markers:
        if not (y_lo <= ev <= y_hi and x_lo <= xv <= x_hi):
            continue
        fill = MARKER_FILL.get(cls, "#808080")
        out.append(f'<circle cx="{_fmt(to_x(xv))}" cy="{_fmt(to_y(ev))}" '
                   f'r="2.20" fill="{fill}"/>')
    for ci, pts in enumerate(curves):
        pts = np.asarray(pts, float)
        coords = " ".join(f"{_fmt(to_x(p[0]))},{_fmt(to_y(p[1]))}"
                          for p in pts
                          if x_lo <= p[0] <= x_hi and y_lo <= p[1] <= y_hi)
        if not coords:
            continue
        color = PALETTE[ci % len(PALETTE)]
        out.append(f'<polyline points="{coords}" fill="none" '
                   f'stroke="{color}" stroke-width="1.60"/>')
    out.append(f'<rect x="{_fmt(LEFT)}" y="{_fmt(TOP)}" '
               f'width="{_fmt(WIDTH - RIGHT - LEFT)}" '
               f'height="{_fmt(HEIGHT - BOTTOM - TOP)}" fill="none" '
               f'stroke="#000000" stroke-width="1.00"/>')
    labels = [
        (LEFT, HEIGHT - BOTTOM + 16.0, "start", f"{x_lo:.6g}"),
        (WIDTH - RIGHT, HEIGHT - BOTTOM + 16.0, "end", f"{x_hi:.6g}"),
        (0.5 * (LEFT + WIDTH - RIGHT), HEIGHT - 8.0, "middle", x_label),
        (LEFT - 6.0, HEIGHT - BOTTOM, "end", f"{y_lo:.6g}"),
        (LEFT - 6.0, TOP + 10.0, "end", f"{y_hi:.6g}"),
        (14.0, 0.5 * (TOP + HEIGHT - BOTTOM), "middle", y_label),
    ]
    for px, py, anchor, text in labels:
        out.append(f'<text x="{_fmt(px)}" y="{_fmt(py)}" '
                   f'font-family="monospace" font-size="12" '
                   f'text-anchor="{anchor}">{text}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
