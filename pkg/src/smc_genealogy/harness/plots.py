"""Static SVG line plots of tree-height moments against leaf-set size.

The SVG is assembled by hand: one ``<polyline>`` per resampling scheme, a
log2-scaled horizontal axis for ``n`` and a linear vertical axis.
"""

import math
import os
from xml.sax.saxutils import escape

from ..errors import ConfigurationError, InputError

WIDTH, HEIGHT = 480, 320
MARGIN = {"left": 64, "right": 120, "top": 32, "bottom": 48}
COLORS = {"multinomial": "#1f77b4", "residual": "#d62728", "stratified": "#2ca02c", "systematic": "#9467bd"}
FALLBACK = ("#8c564b", "#e377c2", "#7f7f7f", "#bcbd22")
QUANTITIES = {
    "mean": ("mean_rescaled", "mean rescaled tree height"),
    "variance": ("var_rescaled", "variance of rescaled tree height"),
}


def _ticks(low, high, count=5):
    if high <= low:
        return [low]
    step = (high - low) / (count - 1)
    return [low + k * step for k in range(count)]


def render_svg(series, title, ylabel):
    """SVG text for ``series = {name: [(n, value), ...]}``; ``n`` is drawn on a log2 axis."""
    points = [(n, v) for pts in series.values() for n, v in pts if math.isfinite(v)]
    if not points:
        raise InputError("nothing to plot: every value is missing")
    xs = [math.log2(n) for n, _ in points]
    ys = [v for _, v in points]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    y0, y1 = min(0.0, min(ys)), max(ys)
    y1 = y1 * 1.05 if y1 > 0 else 1.0
    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(n):
        return MARGIN["left"] + (math.log2(n) - x0) / (x1 - x0) * plot_w

    def py(v):
        return MARGIN["top"] + (1.0 - (v - y0) / (y1 - y0)) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
    ]
    left, bottom = MARGIN["left"], HEIGHT - MARGIN["bottom"]
    out.append(f'<line x1="{left}" y1="{bottom}" x2="{left + plot_w}" y2="{bottom}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}" stroke="black"/>')
    for k in range(int(math.ceil(x0)), int(math.floor(x1)) + 1):
        x = px(2 ** k)
        out.append(f'<line x1="{x:.2f}" y1="{bottom}" x2="{x:.2f}" y2="{bottom + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{bottom + 16}" text-anchor="middle">{2 ** k}</text>')
    for v in _ticks(y0, y1):
        y = py(v)
        out.append(f'<line x1="{left - 4}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{left + plot_w / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">'
               "leaf-set size n (log scale)</text>")
    out.append(f'<text x="14" y="{MARGIN["top"] + plot_h / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {MARGIN["top"] + plot_h / 2:.1f})">{escape(ylabel)}</text>')
    for k, (name, pts) in enumerate(series.items()):
        color = COLORS.get(name, FALLBACK[k % len(FALLBACK)])
        coords = " ".join(f"{px(n):.2f},{py(v):.2f}" for n, v in pts if math.isfinite(v))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}">'
                   f"<title>{escape(name)}</title></polyline>")
        ly = MARGIN["top"] + 12 + 16 * k
        lx = WIDTH - MARGIN["right"] + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{lx + 22}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plots(summary, out_dir):
    """Write a mean plot and a variance plot of rescaled tree heights for every N.

    Returns the list of files written, ``heights_mean_N{N}.svg`` then
    ``heights_variance_N{N}.svg`` for each N in increasing order.
    """
    if not summary.rows:
        raise ConfigurationError("cannot plot an empty summary")
    written = []
    for n_particles in summary.particle_counts():
        for kind, (attr, label) in QUANTITIES.items():
            series = {scheme: [(r.n, getattr(r, attr)) for r in sorted(summary.select(scheme, n_particles),
                                                                       key=lambda r: r.n)]
                      for scheme in summary.schemes() if summary.select(scheme, n_particles)}
            title = f"{label}, N = {n_particles}"
            path = os.path.join(out_dir, f"heights_{kind}_N{n_particles}.svg")
            try:
                with open(path, "w") as fh:
                    fh.write(render_svg(series, title, label))
            except OSError as exc:
                raise InputError(f"cannot write plot {path}: {exc}") from exc
            written.append(path)
    return written
