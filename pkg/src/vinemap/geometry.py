"""Planar primitives, obstacle inflation and visibility graphs.

Everything here works in meters and radians. Polygons are stored with
clockwise vertex order, so the interior of every directed edge lies on its
right-hand side. Predicates use an absolute tolerance ``EPS_GEO``, which is
ample for environments about a meter across.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

EPS_GEO = 1e-9
EPS_ANG = 1e-6
TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Base class for invalid geometric input."""


class OffsetError(GeometryError):
    """Raised when inflating a polygon produces a self-intersecting outline."""


class InvalidVertexError(GeometryError):
    """Raised when a graph vertex would sit inside an obstacle."""


class DegenerateHullError(GeometryError):
    """Raised when a convex hull would have no area."""


class Point2(NamedTuple):
    x: float
    y: float


def _as_point(p: Sequence[float]) -> Point2:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise GeometryError(f"non-finite coordinate {p!r}")
    return Point2(x, y)


@dataclass(frozen=True)
class Segment:
    a: Point2
    b: Point2

    def __post_init__(self):
        object.__setattr__(self, "a", _as_point(self.a))
        object.__setattr__(self, "b", _as_point(self.b))
        if self.a == self.b:
            raise GeometryError("segment endpoints coincide")

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)

    @property
    def direction(self) -> float:
        return math.atan2(self.b.y - self.a.y, self.b.x - self.a.x)

    def distance_to(self, p: Sequence[float]) -> float:
        return point_segment_distance(p, self.a, self.b)


# -- small vector helpers ----------------------------------------------------


def cross(ax: float, ay: float, bx: float, by: float) -> float:
    return ax * by - ay * bx


def unit(angle: float) -> tuple[float, float]:
    return math.cos(angle), math.sin(angle)


def distance(p: Sequence[float], q: Sequence[float]) -> float:
    return math.hypot(q[0] - p[0], q[1] - p[1])


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


def point_segment_distance(p: Sequence[float], a: Sequence[float], b: Sequence[float]) -> float:
    ex, ey = b[0] - a[0], b[1] - a[1]
    wx, wy = p[0] - a[0], p[1] - a[1]
    ll = ex * ex + ey * ey
    s = 0.0 if ll == 0 else min(1.0, max(0.0, (wx * ex + wy * ey) / ll))
    return math.hypot(wx - s * ex, wy - s * ey)


def _signed_area(pts: Sequence[Point2]) -> float:
    s = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def segments_intersect(a, b, c, d, eps: float = EPS_GEO) -> bool:
    """Closed-segment intersection test (touching counts)."""
    d1 = cross(b[0] - a[0], b[1] - a[1], c[0] - a[0], c[1] - a[1])
    d2 = cross(b[0] - a[0], b[1] - a[1], d[0] - a[0], d[1] - a[1])
    d3 = cross(d[0] - c[0], d[1] - c[1], a[0] - c[0], a[1] - c[1])
    d4 = cross(d[0] - c[0], d[1] - c[1], b[0] - c[0], b[1] - c[1])
    lab = math.hypot(b[0] - a[0], b[1] - a[1]) or 1.0
    lcd = math.hypot(d[0] - c[0], d[1] - c[1]) or 1.0
    d1, d2, d3, d4 = d1 / lab, d2 / lab, d3 / lcd, d4 / lcd
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True
    return (
        point_segment_distance(c, a, b) <= eps
        or point_segment_distance(d, a, b) <= eps
        or point_segment_distance(a, c, d) <= eps
        or point_segment_distance(b, c, d) <= eps
    )


# -- polygons ----------------------------------------------------------------


class PointLocation(Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


class Polygon:
    """Simple polygon with vertices stored clockwise."""

    __slots__ = ("vertices", "__dict__")

    def __init__(self, vertices: Iterable[Sequence[float]], *, validate: bool = True):
        pts = [_as_point(v) for v in vertices]
        if len(pts) >= 2 and pts[0] == pts[-1]:
            pts.pop()
        if len(pts) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        area = _signed_area(pts)
        if validate:
            if abs(area) <= EPS_GEO * EPS_GEO:
                raise GeometryError("polygon has zero area")
            for i in range(len(pts)):
                if pts[i] == pts[(i + 1) % len(pts)]:
                    raise GeometryError("repeated consecutive vertex")
        if area > 0:
            pts.reverse()
        self.vertices: tuple[Point2, ...] = tuple(pts)
        if validate and len(pts) > 3 and not _is_simple(self.array):
            raise GeometryError("polygon is self-intersecting")

    def __repr__(self) -> str:
        return f"Polygon({[tuple(v) for v in self.vertices]!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Polygon) and self.vertices == other.vertices

    def __hash__(self) -> int:
        return hash(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    @cached_property
    def array(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float)

    @cached_property
    def area(self) -> float:
        return -_signed_area(self.vertices)

    def edges(self) -> Iterator[tuple[Point2, Point2]]:
        n = len(self.vertices)
        for i in range(n):
            yield self.vertices[i], self.vertices[(i + 1) % n]

    def bbox(self) -> tuple[float, float, float, float]:
        a = self.array
        return float(a[:, 0].min()), float(a[:, 1].min()), float(a[:, 0].max()), float(a[:, 1].max())

    def is_convex(self) -> bool:
        v = self.array
        e = np.roll(v, -1, axis=0) - v
        c = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        return bool(np.all(c <= EPS_GEO))

    def boundary_distance(self, p: Sequence[float]) -> float:
        return min(point_segment_distance(p, a, b) for a, b in self.edges())

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon([(x + dx, y + dy) for x, y in self.vertices], validate=False)


def _is_simple(v: np.ndarray) -> bool:
    n = len(v)
    a = v
    b = np.roll(v, -1, axis=0)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if segments_intersect(a[i], b[i], a[j], b[j], eps=0.0):
                return False
    return True


def point_in_polygon(p: Sequence[float], poly: Polygon) -> PointLocation:
    """Even-odd classification with an explicit boundary band of EPS_GEO."""
    if poly.boundary_distance(p) <= EPS_GEO:
        return PointLocation.BOUNDARY
    x, y = p[0], p[1]
    inside = False
    for (x0, y0), (x1, y1) in poly.edges():
        if (y0 > y) != (y1 > y):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if x < xc:
                inside = not inside
    return PointLocation.INSIDE if inside else PointLocation.OUTSIDE


def convex_hull(points: Iterable[Sequence[float]]) -> Polygon:
    """Monotone-chain hull; collinear boundary points are dropped."""
    pts = sorted(set(_as_point(p) for p in points))
    if len(pts) < 3:
        raise DegenerateHullError("fewer than 3 distinct points")

    def half(seq):
        out: list[Point2] = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if cross(a.x - o.x, a.y - o.y, p.x - o.x, p.y - o.y) > 0:
                    break
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3 or abs(_signed_area(hull)) <= EPS_GEO * EPS_GEO:
        raise DegenerateHullError("points are collinear")
    # the chain above is counter-clockwise; Polygon flips it
    return Polygon(hull)


def inflate_obstacle(p: Polygon, r: float) -> Polygon:
    """Outward offset by r with mitered corners."""
    if r < 0:
        raise GeometryError("inflation radius must be non-negative")
    if r == 0:
        return p
    v = p.array
    e = np.roll(v, -1, axis=0) - v
    e /= np.hypot(e[:, 0], e[:, 1])[:, None]
    # clockwise order: the exterior is on the left of each edge
    nrm = np.column_stack([-e[:, 1], e[:, 0]])
    prev = np.roll(nrm, 1, axis=0)
    denom = 1.0 + np.sum(prev * nrm, axis=1)
    if np.any(denom <= 1e-12):
        raise OffsetError("polygon has a zero-width spike")
    out = v + r * (prev + nrm) / denom[:, None]
    oe = np.roll(out, -1, axis=0) - out
    if np.any(np.sum(oe * e, axis=1) <= 0):
        raise OffsetError("offset collapses an edge")
    try:
        q = Polygon(out)
    except GeometryError as exc:
        raise OffsetError(str(exc)) from exc
    if q.area <= p.area:
        raise OffsetError("offset did not grow the polygon")
    return q


def triangulate(poly: Polygon) -> list[tuple[Point2, Point2, Point2]]:
    """Ear clipping; returns clockwise triangles covering the polygon."""
    pts = list(poly.vertices)
    if len(pts) == 3:
        return [tuple(pts)]
    idx = list(range(len(pts)))
    tris = []
    guard = 0
    while len(idx) > 3 and guard < 10 * len(pts) ** 2:
        guard += 1
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = pts[i0], pts[i1], pts[i2]
            # clockwise: a convex corner turns right
            if cross(b.x - a.x, b.y - a.y, c.x - b.x, c.y - b.y) >= 0:
                continue
            clear = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                if _in_triangle(pts[j], a, b, c):
                    clear = False
                    break
            if clear:
                tris.append((a, b, c))
                idx.pop(k)
                break
        else:
            break
    if len(idx) == 3:
        tris.append(tuple(pts[i] for i in idx))
    return tris


def _in_triangle(p, a, b, c) -> bool:
    d1 = cross(b.x - a.x, b.y - a.y, p.x - a.x, p.y - a.y)
    d2 = cross(c.x - b.x, c.y - b.y, p.x - b.x, p.y - b.y)
    d3 = cross(a.x - c.x, a.y - c.y, p.x - c.x, p.y - c.y)
    return d1 <= 0 and d2 <= 0 and d3 <= 0


def polygons_intersect(p: Polygon, q: Polygon, eps: float = EPS_GEO) -> bool:
    """True when the closed polygons share any point."""
    ax0, ay0, ax1, ay1 = p.bbox()
    bx0, by0, bx1, by1 = q.bbox()
    if ax0 > bx1 + eps or bx0 > ax1 + eps or ay0 > by1 + eps or by0 > ay1 + eps:
        return False
    for a, b in p.edges():
        for c, d in q.edges():
            if segments_intersect(a, b, c, d, eps):
                return True
    return (
        point_in_polygon(p.vertices[0], q) is not PointLocation.OUTSIDE
        or point_in_polygon(q.vertices[0], p) is not PointLocation.OUTSIDE
    )


# -- environment -------------------------------------------------------------


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned square [x0, x0 + size] x [y0, y0 + size]."""

    x0: float = 0.0
    y0: float = 0.0
    size: float = 1.0

    def __post_init__(self):
        if not self.size > 0:
            raise GeometryError("bounds size must be positive")

    @property
    def x1(self) -> float:
        return self.x0 + self.size

    @property
    def y1(self) -> float:
        return self.y0 + self.size

    def contains(self, p: Sequence[float], eps: float = EPS_GEO) -> bool:
        return self.x0 - eps <= p[0] <= self.x1 + eps and self.y0 - eps <= p[1] <= self.y1 + eps

    def on_boundary(self, p: Sequence[float], eps: float = EPS_GEO) -> bool:
        if not self.contains(p, eps):
            return False
        return min(abs(p[0] - self.x0), abs(p[0] - self.x1), abs(p[1] - self.y0), abs(p[1] - self.y1)) <= eps

    def exit_distance(self, o: Sequence[float], hx: float, hy: float) -> float:
        """Distance along a ray from an inside point until it leaves the square."""
        t = math.inf
        if hx > 1e-15:
            t = min(t, (self.x1 - o[0]) / hx)
        elif hx < -1e-15:
            t = min(t, (self.x0 - o[0]) / hx)
        if hy > 1e-15:
            t = min(t, (self.y1 - o[1]) / hy)
        elif hy < -1e-15:
            t = min(t, (self.y0 - o[1]) / hy)
        return max(0.0, t)

    def inward_normal(self, p: Sequence[float]) -> float:
        """Angle of the inward normal at a boundary point (corners average)."""
        nx = ny = 0.0
        if abs(p[0] - self.x0) <= 1e-9:
            nx += 1
        if abs(p[0] - self.x1) <= 1e-9:
            nx -= 1
        if abs(p[1] - self.y0) <= 1e-9:
            ny += 1
        if abs(p[1] - self.y1) <= 1e-9:
            ny -= 1
        if nx == 0 and ny == 0:
            raise GeometryError("point is not on the bounds boundary")
        return math.atan2(ny, nx)

    def polygon(self) -> Polygon:
        return Polygon([(self.x0, self.y0), (self.x0, self.y1), (self.x1, self.y1), (self.x1, self.y0)])


@dataclass(frozen=True)
class LaunchPoint:
    id: str
    position: Point2

    def __post_init__(self):
        object.__setattr__(self, "position", _as_point(self.position))


@dataclass(frozen=True)
class Environment:
    obstacles: tuple[Polygon, ...]
    bounds: Bounds
    launch_points: tuple[LaunchPoint, ...]
    robot_radius: float

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "launch_points", tuple(self.launch_points))
        if self.robot_radius < 0:
            raise GeometryError("robot radius must be non-negative")

    @cached_property
    def inflated(self) -> tuple[Polygon, ...]:
        return tuple(inflate_obstacle(p, self.robot_radius) for p in self.obstacles)

    @cached_property
    def obstacle_set(self) -> "ObstacleSet":
        return ObstacleSet(self.inflated)

    @cached_property
    def visibility_graph(self) -> "VisibilityGraph":
        """Graph over inflated corners plus every launch point in free space."""
        obs = self.obstacle_set
        free = [
            lp
            for lp in self.launch_points
            if not obs.strictly_inside(np.array([lp.position.x]), np.array([lp.position.y]))[0]
        ]
        return build_visibility_graph(self, free)

    def launch(self, launch_id: str) -> LaunchPoint:
        for lp in self.launch_points:
            if lp.id == launch_id:
                return lp
        raise KeyError(f"unknown launch point {launch_id!r}")

    def validate(self) -> None:
        """Raise GeometryError naming the first offending item."""
        try:
            inflated = self.inflated
        except OffsetError as exc:
            raise GeometryError(f"obstacle cannot be inflated: {exc}") from exc
        for i in range(len(inflated)):
            for j in range(i + 1, len(inflated)):
                if polygons_intersect(inflated[i], inflated[j]):
                    raise GeometryError(f"obstacles {i} and {j} overlap after inflation")
        seen = set()
        for lp in self.launch_points:
            if lp.id in seen:
                raise GeometryError(f"duplicate launch id {lp.id!r}")
            seen.add(lp.id)
            if not self.bounds.on_boundary(lp.position):
                raise GeometryError(f"launch point {lp.id!r} is not on the bounds boundary")
            for k, poly in enumerate(inflated):
                if point_in_polygon(lp.position, poly) is PointLocation.INSIDE:
                    raise GeometryError(f"launch point {lp.id!r} lies inside obstacle {k}")


# -- batched predicates over a fixed obstacle set ----------------------------


class CastHit(NamedTuple):
    distance: float
    kind: str  # "edge" or "vertex"
    index: int  # edge index (edge k runs from vertex k to next[k]) or vertex index
    point: Point2


class ObstacleSet:
    """Flattened vertex/edge arrays for fast predicates against many polygons."""

    def __init__(self, polygons: Sequence[Polygon]):
        self.polygons = tuple(polygons)
        xs, ys, owner, local, nxt, prv = [], [], [], [], [], []
        base = 0
        for k, poly in enumerate(self.polygons):
            n = len(poly.vertices)
            for i, (x, y) in enumerate(poly.vertices):
                xs.append(x)
                ys.append(y)
                owner.append(k)
                local.append(i)
                nxt.append(base + (i + 1) % n)
                prv.append(base + (i - 1) % n)
            base += n
        self.x = np.array(xs, dtype=float)
        self.y = np.array(ys, dtype=float)
        self.owner = np.array(owner, dtype=int)
        self.local = np.array(local, dtype=int)
        self.next = np.array(nxt, dtype=int)
        self.prev = np.array(prv, dtype=int)
        self.ex = self.x[self.next] - self.x if base else self.x
        self.ey = self.y[self.next] - self.y if base else self.y
        self.elen = np.hypot(self.ex, self.ey)
        self.size = base
        self.starts = np.flatnonzero(self.local == 0) if base else np.zeros(0, dtype=int)
        self.points = [Point2(float(a), float(b)) for a, b in zip(xs, ys)]

    def __len__(self) -> int:
        return self.size

    def point(self, k: int) -> Point2:
        return self.points[k]

    def edge(self, k: int) -> tuple[Point2, Point2]:
        return self.points[k], self.points[int(self.next[k])]

    # strict interior test for many points at once
    def strictly_inside(self, qx: np.ndarray, qy: np.ndarray) -> np.ndarray:
        qx = np.asarray(qx, dtype=float)
        qy = np.asarray(qy, dtype=float)
        out = np.zeros(qx.shape, dtype=bool)
        if self.size == 0 or qx.size == 0:
            return out
        X, Y = qx[..., None], qy[..., None]
        x0, y0 = self.x, self.y
        x1, y1 = self.x[self.next], self.y[self.next]
        with np.errstate(divide="ignore", invalid="ignore"):
            straddle = (y0 > Y) != (y1 > Y)
            xc = x0 + (Y - y0) * (x1 - x0) / (y1 - y0)
            crossing = straddle & (X < xc)
        # distance to each edge for the boundary band
        wx, wy = X - x0, Y - y0
        ll = self.elen**2
        s = np.clip((wx * self.ex + wy * self.ey) / ll, 0.0, 1.0)
        d = np.hypot(wx - s * self.ex, wy - s * self.ey)
        starts = self.starts
        inside = (np.add.reduceat(crossing.astype(np.int32), starts, axis=-1) % 2) == 1
        near = np.minimum.reduceat(d, starts, axis=-1) <= EPS_GEO
        return (inside & ~near).any(axis=-1)

    def visible(self, ax, ay, bx, by) -> np.ndarray:
        """Line of sight for a batch of segments (a_i, b_i)."""
        ax = np.asarray(ax, dtype=float)
        ay = np.asarray(ay, dtype=float)
        bx = np.asarray(bx, dtype=float)
        by = np.asarray(by, dtype=float)
        n = ax.shape[0]
        vis = np.ones(n, dtype=bool)
        if self.size == 0 or n == 0:
            return vis
        dx, dy = bx - ax, by - ay
        L = np.hypot(dx, dy)
        L = np.where(L > 0, L, 1.0)
        cx, cy = self.x[None, :], self.y[None, :]
        qx, qy = self.x[self.next][None, :], self.y[self.next][None, :]
        A_x, A_y = ax[:, None], ay[:, None]
        D_x, D_y = dx[:, None], dy[:, None]
        o1 = (D_x * (cy - A_y) - D_y * (cx - A_x)) / L[:, None]
        o2 = (D_x * (qy - A_y) - D_y * (qx - A_x)) / L[:, None]
        ex, ey, el = self.ex[None, :], self.ey[None, :], self.elen[None, :]
        o3 = (ex * (A_y - cy) - ey * (A_x - cx)) / el
        o4 = (ex * (by[:, None] - cy) - ey * (bx[:, None] - cx)) / el
        eps = EPS_GEO
        proper = (((o1 > eps) & (o2 < -eps)) | ((o1 < -eps) & (o2 > eps))) & (
            ((o3 > eps) & (o4 < -eps)) | ((o3 < -eps) & (o4 > eps))
        )
        vis &= ~proper.any(axis=1)
        # vertices lying on the open segment split it into pieces
        s = ((cx - A_x) * D_x + (cy - A_y) * D_y) / (L[:, None] ** 2)
        on = (np.abs(o1) <= eps) & (s * L[:, None] > eps) & ((1 - s) * L[:, None] > eps)
        plain = vis & ~on.any(axis=1)
        idx = np.nonzero(plain)[0]
        if idx.size:
            mx = ax[idx] + 0.5 * dx[idx]
            my = ay[idx] + 0.5 * dy[idx]
            vis[idx] = ~self.strictly_inside(mx, my)
        for i in np.nonzero(vis & on.any(axis=1))[0]:
            cuts = np.sort(np.concatenate([[0.0], s[i][on[i]], [1.0]]))
            mids = 0.5 * (cuts[:-1] + cuts[1:])
            mx = ax[i] + mids * dx[i]
            my = ay[i] + mids * dy[i]
            vis[i] = not self.strictly_inside(mx, my).any()
        return vis

    def line_of_sight(self, a: Sequence[float], b: Sequence[float]) -> bool:
        return bool(self.visible([a[0]], [a[1]], [b[0]], [b[1]])[0])

    def enters(self, k: int, dx: float, dy: float, eps_ang: float = EPS_ANG) -> bool:
        """Does direction (dx, dy) leaving vertex k point into the polygon interior?"""
        vx, vy = self.x[k], self.y[k]
        n, p = self.next[k], self.prev[k]
        a1 = math.atan2(self.y[n] - vy, self.x[n] - vx)
        a2 = math.atan2(self.y[p] - vy, self.x[p] - vx)
        ad = math.atan2(dy, dx)
        interior = (a1 - a2) % TWO_PI
        cw = (a1 - ad) % TWO_PI
        return eps_ang < cw < interior - eps_ang

    def cast(
        self,
        ox: float,
        oy: float,
        hx: float,
        hy: float,
        max_dist: float = math.inf,
        skip_vertex: int = -1,
    ) -> tuple[CastHit | None, list[tuple[float, int]]]:
        """First entry of a ray into any obstacle interior.

        Touching a vertex without entering, or running along an edge, is a
        graze; grazed vertices before the hit are returned as (distance,
        vertex) pairs so the caller can wrap around them later.
        """
        if self.size == 0:
            return None, []
        eps = EPS_GEO
        wx = self.x - ox
        wy = self.y - oy
        denom = hx * self.ey - hy * self.ex
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (wx * self.ey - wy * self.ex) / denom
            u = (wx * hy - wy * hx) / denom
        ok = (np.abs(denom) > 1e-15) & (t > eps) & (t < max_dist + eps)
        ok &= (u * self.elen > eps) & ((1.0 - u) * self.elen > eps)
        best_t = math.inf
        best: CastHit | None = None
        if ok.any():
            k = int(np.argmin(np.where(ok, t, np.inf)))
            best_t = float(t[k])
            best = CastHit(best_t, "edge", k, Point2(ox + best_t * hx, oy + best_t * hy))
        tv = wx * hx + wy * hy
        dv = np.abs(hx * wy - hy * wx)
        touch = (dv <= eps) & (tv > eps) & (tv < min(best_t, max_dist + eps) + eps)
        grazes: list[tuple[float, int]] = []
        if touch.any():
            cand = np.nonzero(touch)[0]
            cand = cand[np.argsort(tv[cand], kind="stable")]
            for k in cand:
                k = int(k)
                if k == skip_vertex:
                    continue
                tk = float(tv[k])
                if tk > best_t + eps:
                    break
                if self.enters(k, hx, hy):
                    if tk <= best_t + eps:
                        best = CastHit(tk, "vertex", k, self.points[k])
                        best_t = tk
                    break
                grazes.append((tk, k))
        grazes = [g for g in grazes if g[0] < best_t - eps]
        return best, grazes


# -- visibility graph ----------------------------------------------------------


class Provenance(NamedTuple):
    kind: str  # "corner", "launch" or "turn"
    obstacle: int = -1
    index: int = -1
    label: str = ""


class VisibilityGraph:
    """Vertices with line-of-sight adjacency over a fixed obstacle set.

    The first ``len(obstacles)`` vertices are the inflated corners in the
    order of ``ObstacleSet``; extra vertices follow.
    """

    def __init__(
        self,
        obstacles: ObstacleSet,
        points: list[Point2],
        provenance: list[Provenance],
        adjacency: list[set[int]],
        walls: set[tuple[int, int]],
    ):
        self.obstacles = obstacles
        self.points = points
        self.provenance = provenance
        self.adjacency = adjacency
        self.walls = walls

    def __len__(self) -> int:
        return len(self.points)

    @property
    def edge_count(self) -> int:
        return sum(len(s) for s in self.adjacency) // 2

    def neighbors(self, i: int) -> list[int]:
        return sorted(self.adjacency[i])

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.adjacency[i]

    def is_wall(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.walls

    def edges(self) -> Iterator[tuple[int, int]]:
        for i, s in enumerate(self.adjacency):
            for j in s:
                if i < j:
                    yield i, j

    def index_of(self, p: Sequence[float], tol: float = EPS_GEO) -> int | None:
        for i, q in enumerate(self.points):
            if abs(q[0] - p[0]) <= tol and abs(q[1] - p[1]) <= tol:
                return i
        return None

    def copy(self) -> "VisibilityGraph":
        return VisibilityGraph(
            self.obstacles,
            list(self.points),
            list(self.provenance),
            [set(s) for s in self.adjacency],
            self.walls,
        )

    def _check_free(self, p: Point2) -> None:
        if self.obstacles.strictly_inside(np.array([p.x]), np.array([p.y]))[0]:
            raise InvalidVertexError(f"point {tuple(p)} lies inside an obstacle")

    def _link(self, i: int) -> None:
        p = self.points[i]
        others = [j for j in range(len(self.points)) if j != i]
        if not others:
            return
        bx = np.array([self.points[j].x for j in others])
        by = np.array([self.points[j].y for j in others])
        ax = np.full(len(others), p.x)
        ay = np.full(len(others), p.y)
        vis = self.obstacles.visible(ax, ay, bx, by)
        for j, v in zip(others, vis):
            if v and self.points[j] != p:
                self.adjacency[i].add(j)
                self.adjacency[j].add(i)

    def with_vertex(self, p: Sequence[float], provenance: Provenance) -> tuple["VisibilityGraph", int]:
        """Copy of the graph with one more vertex linked by line of sight."""
        p = _as_point(p)
        self._check_free(p)
        g = self.copy()
        g.points.append(p)
        g.provenance.append(provenance)
        g.adjacency.append(set())
        i = len(g.points) - 1
        g._link(i)
        return g, i

    def relocated(self, i: int, p: Sequence[float]) -> "VisibilityGraph":
        """Copy with vertex i moved to p and its edges recomputed."""
        p = _as_point(p)
        if self.provenance[i].kind != "turn":
            raise InvalidVertexError("only turn vertices can be moved")
        if self.points[i] == p:
            return self
        self._check_free(p)
        g = self.copy()
        for j in g.adjacency[i]:
            g.adjacency[j].discard(i)
        g.adjacency[i] = set()
        g.points[i] = p
        g._link(i)
        return g


def build_visibility_graph(
    env: Environment | Sequence[Polygon],
    extra: Iterable[Sequence[float]] = (),
    kind: str = "launch",
) -> VisibilityGraph:
    """Graph over inflated obstacle corners plus the extra points."""
    obs = env.obstacle_set if isinstance(env, Environment) else ObstacleSet(env)
    points = list(obs.points)
    prov = [Provenance("corner", int(o), int(i)) for o, i in zip(obs.owner, obs.local)]
    for k, p in enumerate(extra):
        label = ""
        if isinstance(p, LaunchPoint):
            label, p = p.id, p.position
        p = _as_point(p)
        if obs.strictly_inside(np.array([p.x]), np.array([p.y]))[0]:
            raise InvalidVertexError(f"extra point {tuple(p)} lies inside an obstacle")
        points.append(p)
        prov.append(Provenance(kind, label=label or str(k)))
    n = len(points)
    adjacency: list[set[int]] = [set() for _ in range(n)]
    walls = {(min(k, int(obs.next[k])), max(k, int(obs.next[k]))) for k in range(obs.size)}
    if n > 1:
        ii, jj = np.triu_indices(n, 1)
        P = np.array(points, dtype=float)
        vis = obs.visible(P[ii, 0], P[ii, 1], P[jj, 0], P[jj, 1])
        same = (P[ii, 0] == P[jj, 0]) & (P[ii, 1] == P[jj, 1])
        for i, j in zip(ii[vis & ~same], jj[vis & ~same]):
            adjacency[i].add(int(j))
            adjacency[j].add(int(i))
    for i, j in walls:
        adjacency[i].add(j)
        adjacency[j].add(i)
    return VisibilityGraph(obs, points, prov, adjacency, walls)


def line_of_sight(a: Sequence[float], b: Sequence[float], obstacles: Sequence[Polygon] | ObstacleSet) -> bool:
    """True iff the open segment (a, b) stays out of every obstacle interior."""
    obs = obstacles if isinstance(obstacles, ObstacleSet) else ObstacleSet(obstacles)
    return obs.line_of_sight(a, b)


class RayHit(NamedTuple):
    point: Point2
    wall: Segment
    distance: float


def ray_cast(
    origin: Sequence[float],
    heading: float,
    obstacles: Sequence[Polygon] | ObstacleSet,
    max_distance: float = math.inf,
    bounds: Bounds | None = None,
) -> RayHit | None:
    """Nearest point where the forward ray meets an obstacle boundary."""
    obs = obstacles if isinstance(obstacles, ObstacleSet) else ObstacleSet(obstacles)
    if obs.size == 0:
        return None
    ox, oy = float(origin[0]), float(origin[1])
    hx, hy = unit(heading)
    if bounds is not None:
        max_distance = min(max_distance, bounds.exit_distance((ox, oy), hx, hy))
    eps = EPS_GEO
    wx, wy = obs.x - ox, obs.y - oy
    denom = hx * obs.ey - hy * obs.ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (wx * obs.ey - wy * obs.ex) / denom
        u = (wx * hy - wy * hx) / denom
    ok = (np.abs(denom) > 1e-15) & (t > eps) & (u >= -eps / obs.elen) & (u <= 1 + eps / obs.elen)
    t = np.where(ok, t, np.inf)
    # edges collinear with the ray count at their nearer endpoint
    tv = wx * hx + wy * hy
    on_line = np.abs(hx * wy - hy * wx) <= eps
    tv = np.where(on_line & (tv > eps), tv, np.inf)
    tv_edge = np.minimum(tv, tv[obs.next])
    para = np.abs(denom) <= 1e-15
    t = np.where(para, tv_edge, t)
    k = int(np.argmin(t))
    d = float(t[k])
    if not math.isfinite(d) or d > max_distance:
        return None
    a, b = obs.edge(k)
    return RayHit(Point2(ox + d * hx, oy + d * hy), Segment(a, b), d)
