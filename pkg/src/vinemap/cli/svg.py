"""Deterministic SVG panels of environments, deployments, reconstructions and beliefs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..geometry import Environment
from ..mapping import Belief
from ..sensing import Reconstruction
from ..simulator import DeploymentResult

PIXELS = 500
_MARGIN = 10


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class _Canvas:
    def __init__(self, env: Environment):
        b = env.bounds
        self.x0, self.y0, self.k = b.x0, b.y0, (PIXELS - 2 * _MARGIN) / b.size
        self.parts: list[str] = []

    def xy(self, p) -> str:
        x = _MARGIN + (p[0] - self.x0) * self.k
        y = PIXELS - _MARGIN - (p[1] - self.y0) * self.k  # y up
        return f"{_fmt(x)},{_fmt(y)}"

    def polygon(self, pts, style: str) -> None:
        self.parts.append(f'<polygon points="{" ".join(self.xy(p) for p in pts)}" {style}/>')

    def polyline(self, pts, style: str) -> None:
        self.parts.append(f'<polyline points="{" ".join(self.xy(p) for p in pts)}" fill="none" {style}/>')

    def circle(self, p, r: float, style: str) -> None:
        x, y = self.xy(p).split(",")
        self.parts.append(f'<circle cx="{x}" cy="{y}" r="{_fmt(r)}" {style}/>')


def render_svg(
    env: Environment,
    path=None,
    results: tuple[DeploymentResult, ...] = (),
    belief: Belief | None = None,
    reconstruction: Reconstruction | None = None,
) -> str:
    """SVG text of one panel; also written to `path` when given.

    Layers from the bottom: belief cells (grey = occupied), bounds, swept
    areas, obstacles, walls hit, robot shapes, reconstructed walls and
    pivots, launch points. Identical input gives identical bytes.
    """
    c = _Canvas(env)
    b = env.bounds
    if belief is not None:
        v = belief.values
        h = belief.spec.cell
        for r, col in np.ndindex(v.shape):
            x, y = belief.spec.bounds.x0 + col * h, belief.spec.bounds.y0 + r * h
            shade = int(round(255 * (1 - v[r, col])))
            c.polygon([(x, y), (x + h, y), (x + h, y + h), (x, y + h)], f'fill="rgb({shade},{shade},{shade})" stroke="none"')
    c.polygon([(b.x0, b.y0), (b.x1, b.y0), (b.x1, b.y1), (b.x0, b.y1)], 'fill="none" stroke="black" stroke-width="1"')
    for res in results:
        for p in res.swept_area:
            c.polygon(p.vertices, 'fill="#4a90d9" fill-opacity="0.25" stroke="none"')
    for p in env.obstacles:
        c.polygon(p.vertices, 'fill="#555555" stroke="black" stroke-width="0.5"')
    for res in results:
        for s in res.wall_contacts:
            c.polyline([s.a, s.b], 'stroke="#d0021b" stroke-width="3"')
        c.polyline(res.shape.points, 'stroke="#2a6f2a" stroke-width="2"')
    if reconstruction is not None:
        c.polyline(reconstruction.shape.points, 'stroke="#f5a623" stroke-width="1.5" stroke-dasharray="4,3"')
        for p, _ in reconstruction.wall_points:
            c.circle(p, 1.5, 'fill="#d0021b"')
        for p in reconstruction.pivots:
            c.circle(p, 3, 'fill="none" stroke="#f5a623" stroke-width="1.5"')
    for lp in env.launch_points:
        c.circle(lp.position, 4, 'fill="black"')
    body = "\n".join(c.parts)
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{PIXELS}" height="{PIXELS}" '
        f'viewBox="0 0 {PIXELS} {PIXELS}">\n{body}\n</svg>\n'
    )
    if path is not None:
        Path(path).write_text(svg)
    return svg
