"""Square grid decomposition and exact cell coverage.

Grids are (n, n) arrays indexed [row, col]: row r covers
y in [y0 + r*h, y0 + (r+1)*h] and col c covers x in [x0 + c*h, x0 + (c+1)*h].
A cell is covered when a shape overlaps it with nonzero area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import Bounds, Environment, Polygon, triangulate
from ..simulator import DeploymentResult

GRID_SIZE = 35
_OVERLAP_EPS = 1e-9  # projections must overlap by more than this (m)
HIT_DEPTH = 1e-6  # m into the obstacle; a radius-deep band spills past thin corners


@dataclass(frozen=True)
class GridSpec:
    bounds: Bounds = Bounds()
    n: int = GRID_SIZE

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("grid needs at least one cell per side")

    @property
    def cell(self) -> float:
        return self.bounds.size / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return self.n, self.n

    def zeros(self, dtype=bool) -> np.ndarray:
        return np.zeros(self.shape, dtype=dtype)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre x and y, each (n, n)."""
        h = self.cell
        c = self.bounds.x0 + h * (np.arange(self.n) + 0.5)
        r = self.bounds.y0 + h * (np.arange(self.n) + 0.5)
        return np.meshgrid(c, r)


def _triangles_of(poly: Polygon) -> list:
    v = poly.vertices
    if len(v) == 3:
        return [v]
    if poly.is_convex():
        return [(v[0], v[i], v[i + 1]) for i in range(1, len(v) - 1)]
    return triangulate(poly)


def cover_triangles(spec: GridSpec, tris) -> np.ndarray:
    """Boolean grid of cells overlapped with nonzero area by any triangle (T, 3, 2).

    Each triangle is sliced by the grid rows; a slice is convex, so a cell
    meets its interior exactly when the cell's x-range overlaps the slice's
    open x-range. Touching counts as no overlap.
    """
    out = spec.zeros()
    tris = np.asarray(tris, dtype=float).reshape(-1, 3, 2)
    if len(tris) == 0:
        return out
    p, q = tris, np.roll(tris, -1, axis=1)
    area2 = np.abs((q[:, 0, 0] - p[:, 0, 0]) * (q[:, 1, 1] - p[:, 0, 1]) - (q[:, 0, 1] - p[:, 0, 1]) * (q[:, 1, 0] - p[:, 0, 0]))
    keep = area2 > 1e-18
    p, q = p[keep], q[keep]
    if len(p) == 0:
        return out
    h = spec.cell
    y0 = (spec.bounds.y0 + h * np.arange(spec.n))[None, None, :]
    y1 = y0 + h
    ya, yb = np.minimum(p[..., 1], q[..., 1])[..., None], np.maximum(p[..., 1], q[..., 1])[..., None]
    lo, hi = np.maximum(ya, y0), np.minimum(yb, y1)  # (T, 3, n): edge clipped to each row
    valid = hi >= lo
    dy = (q[..., 1] - p[..., 1])[..., None]
    flat = np.abs(dy) < 1e-15
    slope = np.where(flat, 0.0, (q[..., 0] - p[..., 0])[..., None] / np.where(flat, 1.0, dy))
    xl = p[..., 0, None] + slope * (lo - p[..., 1, None])
    xh = p[..., 0, None] + slope * (hi - p[..., 1, None])
    xmin_e = np.where(flat, np.minimum(p[..., 0], q[..., 0])[..., None], np.minimum(xl, xh))
    xmax_e = np.where(flat, np.maximum(p[..., 0], q[..., 0])[..., None], np.maximum(xl, xh))
    xmin = np.where(valid, xmin_e, np.inf).min(axis=1)  # (T, n)
    xmax = np.where(valid, xmax_e, -np.inf).max(axis=1)
    ty0, ty1 = p[..., 1].min(axis=1)[:, None], p[..., 1].max(axis=1)[:, None]
    row_ok = np.minimum(ty1, y1[0]) - np.maximum(ty0, y0[0]) > _OVERLAP_EPS  # (T, n)
    X = (spec.bounds.x0 + h * np.arange(spec.n))[None, None, :]
    cells = np.minimum(xmax[..., None], X + h) - np.maximum(xmin[..., None], X) > _OVERLAP_EPS
    out |= (cells & row_ok[..., None]).any(axis=0)
    return out


def cover_polygons(spec: GridSpec, polys) -> np.ndarray:
    tris = [t for p in polys for t in _triangles_of(p)]
    return cover_triangles(spec, tris)


def _band(a, b, w_left: float, w_right: float) -> list:
    """Two triangles of the band around a->b, w_left to its left and w_right to its right."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    d = math.hypot(dx, dy)
    if d < 1e-12:
        return []
    nx, ny = -dy / d, dx / d
    p1 = (a[0] + w_left * nx, a[1] + w_left * ny)
    p2 = (b[0] + w_left * nx, b[1] + w_left * ny)
    p3 = (b[0] - w_right * nx, b[1] - w_right * ny)
    p4 = (a[0] - w_right * nx, a[1] - w_right * ny)
    return [(p1, p2, p3), (p1, p3, p4)]


def rubric(env: Environment, spec: GridSpec | None = None) -> np.ndarray:
    """1 where a true (uninflated) obstacle partially or fully occupies the cell."""
    spec = GridSpec(env.bounds) if spec is None else spec
    return cover_polygons(spec, env.obstacles).astype(float)


def hit_bands(env: Environment, result: DeploymentResult) -> list:
    """Triangles of a thin band just inside each contacted true wall.

    The tip centre runs along inflated edges. Each contact is projected onto
    the true edge, clipped to it, and thickened HIT_DEPTH to the right of
    the directed edge (clockwise polygons keep their interior on the right),
    so only cells holding the touched wall are marked. Contacts that never
    slid (locks, stuck tips) get a band one radius long.
    """
    obs = env.obstacle_set
    r = max(env.robot_radius, 1e-6)
    pieces = [(seg.a, seg.b, k) for seg, k in zip(result.walls_hit, result.wall_edges)]
    for e in result.events:
        if e.index >= 0 and math.isfinite(e.theta_c):
            pieces.append((e.point, e.point, e.index))
    out = []
    for a, b, k in pieces:
        poly = env.obstacles[int(obs.owner[k])].vertices
        i = int(obs.local[k])
        A, B = poly[i], poly[(i + 1) % len(poly)]
        ex, ey = B[0] - A[0], B[1] - A[1]
        L = math.hypot(ex, ey)
        ex, ey = ex / L, ey / L
        t0, t1 = sorted(((a[0] - A[0]) * ex + (a[1] - A[1]) * ey, (b[0] - A[0]) * ex + (b[1] - A[1]) * ey))
        if t1 - t0 < r:
            m = 0.5 * (t0 + t1)
            t0, t1 = m - 0.5 * r, m + 0.5 * r
        t0, t1 = max(0.0, t0), min(L, t1)
        if t1 - t0 < 1e-12:
            continue
        p0 = (A[0] + t0 * ex, A[1] + t0 * ey)
        p1 = (A[0] + t1 * ex, A[1] + t1 * ey)
        out += _band(p0, p1, 0.0, HIT_DEPTH)
    return out


def corridor(shape_points, radius: float) -> list:
    """Triangles of the body corridor of half-width `radius` around the shape polyline."""
    out = []
    if radius <= 0:
        return out
    for a, b in zip(shape_points, shape_points[1:]):
        out += _band(a, b, radius, radius)
    return out


def rasterize(env: Environment, result: DeploymentResult, spec: GridSpec | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(hit, miss) boolean grids for one deployment.

    hit covers the contacted walls; miss covers the swept area and the body corridor.
    """
    spec = GridSpec(env.bounds) if spec is None else spec
    hit = cover_triangles(spec, hit_bands(env, result))
    tris = [t for p in result.swept_area for t in _triangles_of(p)]
    tris += corridor(result.shape.points, env.robot_radius)
    miss = cover_triangles(spec, tris)
    return hit, miss
