"""Hand-emitted SVG plots (no plotting dependency)."""

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 55


def _ticks(lo, hi, n=6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min((s for s in (1, 2, 5, 10) if s * mag >= raw),
               default=10) * mag
    first = np.ceil(lo / step) * step
    return np.arange(first, hi + 0.5 * step, step)


def _fmt(v):
    return ("%g" % round(v, 10))


def svg_plot(series, title="", xlabel="", ylabel="", histogram=False):
    """Return an SVG document plotting the given series.

    series: list of (x array, y array, label); histogram=True draws the
    first series as a step outline instead of a polyline.
    """
    xs = np.concatenate([np.asarray(s[0], float) for s in series])
    ys = np.concatenate([np.asarray(s[1], float) for s in series])
    fin = np.isfinite(xs) & np.isfinite(ys)
    xlo, xhi = float(xs[fin].min()), float(xs[fin].max())
    ylo, yhi = float(ys[fin].min()), float(ys[fin].max())
    if xhi == xlo:
        xhi = xlo + 1.0
    pad = 0.05 * (yhi - ylo) or 1.0
    ylo, yhi = ylo - pad, yhi + pad
    iw, ih = _W - _ML - _MR, _H - _MT - _MB

    def X(v):
        return _ML + (v - xlo) / (xhi - xlo) * iw

    def Y(v):
        return _MT + (yhi - v) / (yhi - ylo) * ih

    out = ['<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
           'viewBox="0 0 %d %d">' % (_W, _H, _W, _H),
           '<rect width="%d" height="%d" fill="white"/>' % (_W, _H),
           '<text x="%d" y="24" font-size="16" text-anchor="middle" '
           'font-family="sans-serif">%s</text>' % (_W // 2, title)]
    # axes and ticks
    out.append('<rect x="%d" y="%d" width="%d" height="%d" fill="none" '
               'stroke="#333"/>' % (_ML, _MT, iw, ih))
    for tx in _ticks(xlo, xhi):
        if not (xlo <= tx <= xhi):
            continue
        out.append('<line x1="%.1f" y1="%d" x2="%.1f" y2="%d" stroke="#333"/>'
                   % (X(tx), _MT + ih, X(tx), _MT + ih + 5))
        out.append('<text x="%.1f" y="%d" font-size="11" text-anchor="middle" '
                   'font-family="sans-serif">%s</text>'
                   % (X(tx), _MT + ih + 18, _fmt(tx)))
    for ty in _ticks(ylo, yhi):
        if not (ylo <= ty <= yhi):
            continue
        out.append('<line x1="%d" y1="%.1f" x2="%d" y2="%.1f" stroke="#333"/>'
                   % (_ML - 5, Y(ty), _ML, Y(ty)))
        out.append('<text x="%d" y="%.1f" font-size="11" text-anchor="end" '
                   'font-family="sans-serif">%s</text>'
                   % (_ML - 8, Y(ty) + 4, _fmt(ty)))
    out.append('<text x="%d" y="%d" font-size="13" text-anchor="middle" '
               'font-family="sans-serif">%s</text>'
               % (_ML + iw // 2, _H - 12, xlabel))
    out.append('<text x="16" y="%d" font-size="13" text-anchor="middle" '
               'font-family="sans-serif" transform="rotate(-90 16 %d)">%s'
               '</text>' % (_MT + ih // 2, _MT + ih // 2, ylabel))
    for i, (x, y, label) in enumerate(series):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        color = _COLORS[i % len(_COLORS)]
        if histogram and i == 0:
            pts = []
            for j in range(len(x) - 1):
                pts += ["%.1f,%.1f" % (X(x[j]), Y(y[j])),
                        "%.1f,%.1f" % (X(x[j + 1]), Y(y[j]))]
            out.append('<polyline points="%s" fill="none" stroke="%s" '
                       'stroke-width="1.5"/>' % (" ".join(pts), color))
        else:
            ok = np.isfinite(x) & np.isfinite(y)
            pts = " ".join("%.1f,%.1f" % (X(a), Y(b))
                           for a, b in zip(x[ok], y[ok]))
            out.append('<polyline points="%s" fill="none" stroke="%s" '
                       'stroke-width="1.5"/>' % (pts, color))
        if label:
            out.append('<text x="%d" y="%d" font-size="12" fill="%s" '
                       'font-family="sans-serif">%s</text>'
                       % (_ML + 10, _MT + 16 + 16 * i, color, label))
    out.append("</svg>")
    return "\n".join(out)
