"""Minimal three-panel SVG convergence charts (no plotting dependency).

Renders the classic triple — relative distance to the equilibrium, dual
disagreement, constraint violation — as log-y polylines against the
iteration/epoch index.  Output is plain well-formed XML.
"""

import math

PANELS = (
    ("rel_dist_to_opt", "relative distance to x*"),
    ("disagreement", "dual disagreement"),
    ("violation", "constraint violation"),
)

_W, _H = 340, 260            # per-panel canvas
_ML, _MR, _MT, _MB = 52, 12, 28, 36   # margins
_FLOOR = 1e-16


def _fmt(v):
    return "%.2f" % v


def _log_ticks(lo, hi):
    lo_e = int(math.floor(math.log10(lo)))
    hi_e = int(math.ceil(math.log10(hi)))
    step = max(1, (hi_e - lo_e) // 6)
    return [10.0 ** e for e in range(lo_e, hi_e + 1, step)]


def _panel(xs, ys, label, offset_x):
    """One log-y panel as a list of SVG fragments."""
    pts = [(x, y) for x, y in zip(xs, ys)
           if y is not None and not math.isnan(y)]
    out = ["<g transform=\"translate(%d,0)\">" % offset_x]
    out.append('<rect x="%d" y="%d" width="%d" height="%d" fill="none" '
               'stroke="#444"/>' % (_ML, _MT, _W - _ML - _MR,
                                    _H - _MT - _MB))
    out.append('<text x="%d" y="16" font-size="12" text-anchor="middle" '
               'fill="#222">%s</text>' % (_ML + (_W - _ML - _MR) // 2, label))
    if not pts:
        out.append('<text x="%d" y="%d" font-size="11" fill="#888" '
                   'text-anchor="middle">no data</text>'
                   % (_ML + (_W - _ML - _MR) // 2, _H // 2))
        out.append("</g>")
        return out

    ys_pos = [max(p[1], _FLOOR) for p in pts]
    y_lo, y_hi = min(ys_pos), max(ys_pos)
    if y_lo == y_hi:
        y_lo, y_hi = y_lo / 10.0, y_hi * 10.0
    x_lo, x_hi = pts[0][0], pts[-1][0]
    if x_lo == x_hi:
        x_hi = x_lo + 1
    plot_w = _W - _ML - _MR
    plot_h = _H - _MT - _MB

    def sx(x):
        return _ML + plot_w * (x - x_lo) / (x_hi - x_lo)

    def sy(y):
        t = ((math.log10(max(y, _FLOOR)) - math.log10(y_lo))
             / (math.log10(y_hi) - math.log10(y_lo)))
        return _MT + plot_h * (1.0 - t)

    for tick in _log_ticks(y_lo, y_hi):
        if tick < y_lo * 0.999 or tick > y_hi * 1.001:
            continue
        yy = sy(tick)
        out.append('<line x1="%d" y1="%s" x2="%d" y2="%s" stroke="#ddd"/>'
                   % (_ML, _fmt(yy), _W - _MR, _fmt(yy)))
        out.append('<text x="%d" y="%s" font-size="9" text-anchor="end" '
                   'fill="#555">1e%d</text>'
                   % (_ML - 4, _fmt(yy + 3), int(round(math.log10(tick)))))
    for frac in (0.0, 0.5, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        out.append('<text x="%s" y="%d" font-size="9" text-anchor="middle" '
                   'fill="#555">%d</text>'
                   % (_fmt(sx(xv)), _H - _MB + 14, int(round(xv))))
    poly = " ".join("%s,%s" % (_fmt(sx(x)), _fmt(sy(y)))
                    for (x, _), y in zip(pts, ys_pos))
    out.append('<polyline points="%s" fill="none" stroke="#1f6fb2" '
               'stroke-width="1.4"/>' % poly)
    out.append("</g>")
    return out


def render_convergence_svg(trace, title=None):
    """Three-panel SVG (string) from a MetricsTrace."""
    total_w = _W * len(PANELS)
    frags = ['<svg xmlns="http://www.w3.org/2000/svg" width="%d" '
             'height="%d" viewBox="0 0 %d %d">'
             % (total_w, _H, total_w, _H),
             '<rect width="%d" height="%d" fill="white"/>' % (total_w, _H)]
    if title:
        frags.append('<text x="6" y="14" font-size="11" fill="#333">%s'
                     '</text>' % title)
    xs = list(trace.column(trace.index_name))
    for p, (field, label) in enumerate(PANELS):
        ys = trace.column(field)
        frags.extend(_panel(xs, list(ys), label, p * _W))
    frags.append("</svg>")
    return "\n".join(frags) + "\n"


def save_convergence_svg(path, trace, title=None):
    with open(path, "w") as fh:
        fh.write(render_convergence_svg(trace, title=title))
