"""Static SVG rendering of genuine/impostor score histograms.

Output is a pure function of the report: no timestamps, fixed number
formatting, fixed element order.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from .evaluation import SeparabilityReport

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 40, 50
COLORS = {"genuine": "#1f77b4", "impostor": "#d62728"}


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _densities(counts, edges):
    total = sum(counts)
    return [c / (total * (b - a)) for c, a, b in zip(counts, edges, edges[1:])]


def _step_path(dens, edges, sx, sy):
    pts = [(sx(edges[0]), sy(0.0))]
    for d, a, b in zip(dens, edges, edges[1:]):
        pts += [(sx(a), sy(d)), (sx(b), sy(d))]
    pts.append((sx(edges[-1]), sy(0.0)))
    return "M " + " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in pts) + " Z"


def histogram_svg(report: SeparabilityReport, title: str = "Genuine vs impostor scores") -> str:
    edges = list(report.bin_edges)
    if len(edges) < 2 or len(report.genuine_counts) != len(edges) - 1 or len(report.impostor_counts) != len(edges) - 1:
        raise ValueError("report histogram is malformed")
    if sum(report.genuine_counts) == 0 or sum(report.impostor_counts) == 0:
        raise ValueError("report histogram is empty")

    series = {
        "genuine": _densities(report.genuine_counts, edges),
        "impostor": _densities(report.impostor_counts, edges),
    }
    y_max = max(max(v) for v in series.values()) * 1.05
    x0, x1 = edges[0], edges[-1]
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + ph - y / y_max * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="22" text-anchor="middle" font-size="15" font-family="sans-serif">{escape(title)}</text>',
    ]
    for name, dens in series.items():
        out.append(f'<path class="{name}" d="{_step_path(dens, edges, sx, sy)}" fill="{COLORS[name]}" '
                   f'fill-opacity="0.35" stroke="{COLORS[name]}" stroke-width="1.2"/>')

    # axes and ticks
    base = TOP + ph
    out.append(f'<line x1="{LEFT}" y1="{base}" x2="{LEFT + pw}" y2="{base}" stroke="black"/>')
    out.append(f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{base}" stroke="black"/>')
    for i in range(5):
        xv = x0 + i * (x1 - x0) / 4
        out.append(f'<text x="{_fmt(sx(xv))}" y="{base + 16}" text-anchor="middle" font-size="11" '
                   f'font-family="sans-serif">{xv:.1f}</text>')
    for i in range(5):
        yv = i * y_max / 4
        out.append(f'<text x="{LEFT - 6}" y="{_fmt(sy(yv) + 4)}" text-anchor="end" font-size="11" '
                   f'font-family="sans-serif">{yv:.2f}</text>')
    out.append(f'<text x="{LEFT + pw // 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="13" '
               f'font-family="sans-serif">cosine similarity</text>')
    out.append(f'<text x="16" y="{TOP + ph // 2}" text-anchor="middle" font-size="13" font-family="sans-serif" '
               f'transform="rotate(-90 16 {TOP + ph // 2})">density</text>')

    # legend and metric annotation
    lx = LEFT + 12
    for k, name in enumerate(series):
        ly = TOP + 12 + 18 * k
        out.append(f'<rect x="{lx}" y="{ly - 9}" width="12" height="10" fill="{COLORS[name]}" fill-opacity="0.6"/>')
        out.append(f'<text x="{lx + 18}" y="{ly}" font-size="12" font-family="sans-serif">{name}</text>')
    fdr = "inf" if report.fdr == float("inf") else f"{report.fdr:.3f}"
    out.append(f'<text class="metrics" x="{LEFT + pw - 8}" y="{TOP + 12}" text-anchor="end" font-size="12" '
               f'font-family="sans-serif">EER = {report.eer:.3f}   FDR = {fdr}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
