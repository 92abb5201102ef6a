"""SVG overlay of an annotation for eyeballing parses."""
from __future__ import annotations

from xml.sax.saxutils import escape

from .annotation import Annotation

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")


def render_svg(a: Annotation, show_spans: bool = True) -> str:
    w, h = a.image_size
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
           f'<rect width="{w}" height="{h}" fill="white"/>']
    for t in a.tables:
        color = _PALETTE[t.id % len(_PALETTE)]
        out.append(f'<g id="table-{t.id}" stroke="{color}" fill="{color}" fill-opacity="0.08">')
        for c in t.cells:
            pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in c.quad.vertices)
            out.append(f'<polygon points="{pts}" stroke-width="1"/>')
            if show_spans and c.has_spans:
                cx, cy = c.quad.vertices.mean(axis=0)
                label = escape(f"{c.start_row}-{c.end_row},{c.start_col}-{c.end_col}")
                out.append(f'<text x="{cx:.1f}" y="{cy:.1f}" font-size="9" text-anchor="middle" '
                           f'dominant-baseline="middle" fill-opacity="1" stroke="none">{label}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
