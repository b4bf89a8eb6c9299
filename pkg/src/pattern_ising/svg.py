"""Deterministic SVG drawings of circle patterns with optional overlays.

Circles are thin grey, primal edges solid and dual edges (chords) dashed.
Output bytes depend only on the inputs: coordinates are printed with a
fixed number of decimals and elements are emitted in index order.
"""

from __future__ import annotations

import numpy as np

OVERLAYS = ("none", "couplings", "correlations", "observable")

# blue -> red ramp, endpoints of a diverging palette
_LOW = np.array([0x2b, 0x8c, 0xbe])
_HIGH = np.array([0xd7, 0x30, 0x27])


def _fmt(x: float) -> str:
    s = f"{x:.4f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _color(t: float) -> str:
    t = float(np.clip(t, 0.0, 1.0))
    rgb = np.rint(_LOW + t * (_HIGH - _LOW)).astype(int)
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _normalize(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    if hi - lo < 1e-15:
        return np.full_like(v, 0.5)
    return (v - lo) / (hi - lo)


def render_svg(pattern, overlay: str = "none", values=None, width_px: int = 600,
               title: str | None = None) -> str:
    """SVG text for ``pattern``.

    ``values`` feeds the overlay: couplings per undirected edge, correlations
    per vertex, or observable magnitudes per undirected edge.
    """
    if overlay not in OVERLAYS:
        raise ValueError(f"unknown overlay {overlay!r}")
    if overlay != "none" and values is None:
        raise ValueError(f"overlay {overlay!r} needs data")
    c = np.asarray(pattern.centers)
    r = np.asarray(pattern.radii)
    d = np.asarray(pattern.dual)
    xs = np.concatenate([c.real - r, c.real + r, d.real])
    ys = np.concatenate([c.imag - r, c.imag + r, d.imag])
    pad = 0.05 * max(xs.max() - xs.min(), ys.max() - ys.min())
    x0, x1 = xs.min() - pad, xs.max() + pad
    y0, y1 = ys.min() - pad, ys.max() + pad
    scale = width_px / (x1 - x0)
    height_px = int(round((y1 - y0) * scale))
    sw = 1.2 / scale

    def X(z):
        return _fmt(z.real)

    def Y(z):
        return _fmt(y0 + y1 - z.imag)  # flip so the y axis points up

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{height_px}" '
           f'viewBox="{_fmt(x0)} {_fmt(y0)} {_fmt(x1 - x0)} {_fmt(y1 - y0)}">']
    if title:
        out.append(f"<title>{title}</title>")
    out.append(f'<g id="circles" fill="none" stroke="#999999" stroke-width="{_fmt(sw * 0.6)}">')
    for z, rad in zip(c, r):
        out.append(f'<circle cx="{X(z)}" cy="{Y(z)}" r="{_fmt(rad)}"/>')
    out.append("</g>")
    out.append(f'<g id="dual" stroke="#555555" stroke-width="{_fmt(sw * 0.8)}" '
               f'stroke-dasharray="{_fmt(4 * sw)} {_fmt(3 * sw)}">')
    for a, b in np.asarray(pattern.chords):
        out.append(f'<line x1="{X(d[a])}" y1="{Y(d[a])}" x2="{X(d[b])}" y2="{Y(d[b])}"/>')
    out.append("</g>")

    edge_vals = None
    if overlay in ("couplings", "observable"):
        edge_vals = np.asarray(values, dtype=float)
        if edge_vals.shape != (pattern.n_edges,):
            raise ValueError("edge overlay needs one value per edge")
        t = _normalize(edge_vals)
    out.append(f'<g id="primal" stroke="#000000" stroke-width="{_fmt(sw * 1.5)}">')
    for k, (a, b) in enumerate(np.asarray(pattern.edges)):
        attrs = ""
        if edge_vals is not None:
            w = sw * (1.5 + 3.0 * t[k]) if overlay == "observable" else sw * 2.5
            attrs = f' stroke="{_color(t[k])}" stroke-width="{_fmt(w)}"'
        out.append(f'<line x1="{X(c[a])}" y1="{Y(c[a])}" x2="{X(c[b])}" y2="{Y(c[b])}"{attrs}/>')
    out.append("</g>")

    out.append('<g id="vertices">')
    vert = None
    if overlay == "correlations":
        vert = np.asarray(values, dtype=float)
        if vert.shape != (pattern.n_vertices,):
            raise ValueError("correlation overlay needs one value per vertex")
    rad_v = 0.08 * float(np.median(r))
    for i, z in enumerate(c):
        fill = "#000000" if vert is None else _color(vert[i])
        out.append(f'<circle cx="{X(z)}" cy="{Y(z)}" r="{_fmt(rad_v if vert is None else 2 * rad_v)}" '
                   f'fill="{fill}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, pattern, **kwargs) -> str:
    text = render_svg(pattern, **kwargs)
    with open(path, "w") as fh:
        fh.write(text)
    return text
