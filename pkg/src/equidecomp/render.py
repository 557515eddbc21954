"""SVG rendering of piece assignments (k = 2): two panels, source pieces and
their translated images, one deterministic color per translation offset."""
from __future__ import annotations

import hashlib
from typing import Any

from .matching import PieceAssignment
from .window import Window


def _color(offset: tuple[int, ...]) -> str:
    h = hashlib.sha256(repr(tuple(offset)).encode()).digest()
    # readable mid-range colors from the hash
    r = 40 + h[0] % 180
    g = 40 + h[1] % 180
    b = 40 + h[2] % 180
    return f"#{r:02x}{g:02x}{b:02x}"


def _region_outline(region, size: float, ox: float, oy: float) -> str:
    if region is None:
        return ""
    kind = getattr(region, "kind", None)
    m = 1 << getattr(region, "bits", 62)
    if kind == "disk":
        cx = ox + region.center[0] / m * size
        cy = oy + (1 - region.center[1] / m) * size
        rr = region.radius / m * size
        return (f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{rr:.2f}" '
                f'fill="none" stroke="#333" stroke-width="1"/>')
    if kind == "box":
        x = ox + region.corner[0] / m * size
        wdt = region.sides[0] / m * size
        hgt = region.sides[1] / m * size
        y = oy + (1 - (region.corner[1] + region.sides[1]) / m) * size
        return (f'<rect x="{x:.2f}" y="{y:.2f}" width="{wdt:.2f}" '
                f'height="{hgt:.2f}" fill="none" stroke="#333" '
                f'stroke-width="1"/>')
    return ""


def render_svg(pa: PieceAssignment, w: Window, path: str,
               size: int = 420, dot: float = 1.4) -> dict[str, Any]:
    """Write a two-panel figure: source points colored by piece, and the
    target panel with every point moved by its piece's translation."""
    if w.k != 2:
        raise ValueError("SVG rendering requires k = 2")
    m = 1 << w.gen.bits
    pad = 10
    width = 2 * size + 3 * pad
    height = size + 2 * pad + 14 * (len(pa.pieces) // 4 + 2)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             '<rect width="100%" height="100%" fill="white"/>']
    panels = ((pad, "source"), (size + 2 * pad, "target"))
    for ox, label in panels:
        parts.append(f'<rect x="{ox}" y="{pad}" width="{size}" '
                     f'height="{size}" fill="none" stroke="#888"/>')
        parts.append(f'<text x="{ox + 4}" y="{pad + 12}" font-size="11" '
                     f'fill="#555">{label}</text>')
    parts.append(_region_outline(w.shapeA, size, pad, pad))
    parts.append(_region_outline(w.shapeB, size, size + 2 * pad, pad))
    counts = {}
    for off, pts in sorted(pa.pieces.items()):
        col = _color(off)
        counts[off] = len(pts)
        for p in pts:
            pos = w.act(p)
            x = pad + pos.coords[0] / m * size
            y = pad + (1 - pos.coords[1] / m) * size
            parts.append(f'<rect x="{x - dot / 2:.2f}" y="{y - dot / 2:.2f}" '
                         f'width="{dot}" height="{dot}" fill="{col}"/>')
            tgt = pa.assignment[p]
            tpos = w.act(tgt)
            tx = size + 2 * pad + tpos.coords[0] / m * size
            ty = pad + (1 - tpos.coords[1] / m) * size
            parts.append(f'<rect x="{tx - dot / 2:.2f}" '
                         f'y="{ty - dot / 2:.2f}" width="{dot}" '
                         f'height="{dot}" fill="{col}"/>')
    y = size + 2 * pad + 10
    x = pad
    for i, (off, cnt) in enumerate(sorted(counts.items())):
        col = _color(off)
        parts.append(f'<rect x="{x}" y="{y - 8}" width="8" height="8" '
                     f'fill="{col}"/>')
        parts.append(f'<text x="{x + 11}" y="{y}" font-size="9" '
                     f'fill="#333">{off} ({cnt})</text>')
        x += 120
        if x > width - 130:
            x = pad
            y += 14
    parts.append("</svg>")
    text = "\n".join(parts)
    from .pipeline import atomic_write
    atomic_write(path, text)
    return {"path": path, "pieces": len(pa.pieces),
            "points": sum(counts.values())}
