"""Minimal deterministic SVG rendering of accuracy-vs-deletion curves.

Hand-rolled rather than delegated to a plotting library so that repeated
runs produce byte-identical files.
"""

WIDTH, HEIGHT = 640, 440
MARGIN_LEFT, MARGIN_RIGHT = 70, 30
MARGIN_TOP, MARGIN_BOTTOM = 40, 60

STRATEGY_COLORS = {"nam": "#d62728", "random": "#1f77b4"}
FALLBACK_COLOR = "#2ca02c"


def _x(p: float) -> float:
    span = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    return MARGIN_LEFT + span * p


def _y(acc: float) -> float:
    span = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    return MARGIN_TOP + span * (1.0 - acc)


def render_curves_svg(curves) -> str:
    """One polyline per strategy (mean over seeds for random curves)."""
    curves = list(curves)
    if not curves or any(not c.p_values for c in curves):
        raise ValueError("no curves to plot")

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        # axes
        f'<line x1="{_x(0):.1f}" y1="{_y(0):.1f}" x2="{_x(1):.1f}" '
        f'y2="{_y(0):.1f}" stroke="black" stroke-width="1"/>',
        f'<line x1="{_x(0):.1f}" y1="{_y(0):.1f}" x2="{_x(0):.1f}" '
        f'y2="{_y(1):.1f}" stroke="black" stroke-width="1"/>',
    ]
    for i in range(11):
        p = i / 10.0
        parts.append(
            f'<line x1="{_x(p):.1f}" y1="{_y(0):.1f}" x2="{_x(p):.1f}" '
            f'y2="{_y(0) + 5:.1f}" stroke="black" stroke-width="1"/>')
        parts.append(
            f'<text x="{_x(p):.1f}" y="{_y(0) + 20:.1f}" font-size="11" '
            f'text-anchor="middle">{p:.1f}</text>')
    for i in range(6):
        a = i / 5.0
        parts.append(
            f'<line x1="{_x(0) - 5:.1f}" y1="{_y(a):.1f}" x2="{_x(0):.1f}" '
            f'y2="{_y(a):.1f}" stroke="black" stroke-width="1"/>')
        parts.append(
            f'<text x="{_x(0) - 10:.1f}" y="{_y(a) + 4:.1f}" font-size="11" '
            f'text-anchor="end">{a:.1f}</text>')
    parts.append(
        f'<text x="{(_x(0) + _x(1)) / 2:.1f}" y="{HEIGHT - 15}" '
        f'font-size="13" text-anchor="middle">deletion fraction p</text>')
    parts.append(
        f'<text x="18" y="{(_y(0) + _y(1)) / 2:.1f}" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 18 '
        f'{(_y(0) + _y(1)) / 2:.1f})">accuracy</text>')

    legend_y = MARGIN_TOP + 8
    for curve in curves:
        color = STRATEGY_COLORS.get(curve.strategy, FALLBACK_COLOR)
        points = " ".join(f"{_x(p):.2f},{_y(a):.2f}"
                          for p, a in zip(curve.p_values, curve.accuracies))
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" '
            f'stroke-width="2"/>')
        for p, a in zip(curve.p_values, curve.accuracies):
            parts.append(
                f'<circle cx="{_x(p):.2f}" cy="{_y(a):.2f}" r="3" '
                f'fill="{color}"/>')
        parts.append(
            f'<line x1="{WIDTH - 150}" y1="{legend_y}" x2="{WIDTH - 120}" '
            f'y2="{legend_y}" stroke="{color}" stroke-width="2"/>')
        parts.append(
            f'<text x="{WIDTH - 114}" y="{legend_y + 4}" font-size="12">'
            f'{curve.strategy}</text>')
        legend_y += 18

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
