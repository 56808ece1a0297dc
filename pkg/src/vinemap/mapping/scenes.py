"""Seeded benchmark environments: uniform squares and non-uniform splatter hulls."""

from __future__ import annotations

import math

import numpy as np

from ..geometry import Bounds, Environment, GeometryError, LaunchPoint, Polygon, convex_hull, inflate_obstacle, polygons_intersect
from ..sensing import DEFAULT_RADIUS
from .grid import GRID_SIZE
from .sampling import STREAM_SCENE, substream

SQUARE_SIDE = 0.12
_UNIFORM, _NONUNIFORM = 0, 1


def default_launch_points(bounds: Bounds = Bounds()) -> tuple[LaunchPoint, ...]:
    """Two entries on the bottom side at one and two thirds."""
    y = bounds.y0
    return (
        LaunchPoint("a", (bounds.x0 + bounds.size / 3, y)),
        LaunchPoint("b", (bounds.x0 + 2 * bounds.size / 3, y)),
    )


def _spaced(polys, radius: float, gap: float) -> bool:
    """Inflated obstacles at least `gap` apart."""
    grown = [inflate_obstacle(p, radius + 0.5 * gap) for p in polys]
    for i in range(len(grown)):
        for j in range(i + 1, len(grown)):
            if polygons_intersect(grown[i], grown[j]):
                return False
    return True


def _place(rng, make, count: int, radius: float, bounds: Bounds, tries: int = 2000) -> Environment:
    gap = bounds.size / GRID_SIZE
    lps = default_launch_points(bounds)
    polys: list[Polygon] = []
    for _ in range(tries):
        if len(polys) == count:
            break
        p = make(rng, len(polys))
        x0, y0, x1, y1 = p.bbox()
        if x0 < bounds.x0 + gap or x1 > bounds.x1 - gap or y0 < bounds.y0 + 0.15 * bounds.size or y1 > bounds.y1 - gap:
            continue
        if _spaced(polys + [p], radius, gap):
            polys.append(p)
    if len(polys) < count:
        raise GeometryError("could not place the requested obstacles")
    env = Environment(tuple(polys), bounds, lps, radius)
    env.validate()
    return env


def uniform_scene(index: int, seed: int = 0, radius: float = DEFAULT_RADIUS, bounds: Bounds = Bounds()) -> Environment:
    """3-5 axis-aligned squares of one size, at least one grid cell apart after inflation."""
    rng = substream(seed, STREAM_SCENE, _UNIFORM, index)
    count = int(rng.integers(3, 6))
    s = SQUARE_SIDE * bounds.size

    def make(rng, _):
        x, y = bounds.x0 + rng.uniform(0, bounds.size - s), bounds.y0 + rng.uniform(0, bounds.size - s)
        return Polygon([(x, y), (x + s, y), (x + s, y + s), (x, y + s)])

    return _place(rng, make, count, radius, bounds)


def _splatter(rng, bounds: Bounds) -> Polygon:
    c = bounds.x0 + bounds.size * rng.uniform(0.1, 0.9, 2)
    spread = bounds.size * rng.uniform(0.03, 0.06)
    pts = c + spread * rng.normal(size=(int(rng.integers(8, 16)), 2))
    return convex_hull(pts)


def _notched(rng, bounds: Bounds) -> Polygon:
    """An L-shaped obstacle at a random orientation."""
    a, b = bounds.size * rng.uniform(0.14, 0.22, 2)
    t = bounds.size * rng.uniform(0.04, 0.06)
    local = np.array([(0, 0), (a, 0), (a, t), (t, t), (t, b), (0, b)])
    ang = rng.uniform(0, 2 * math.pi)
    rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    c = bounds.x0 + bounds.size * rng.uniform(0.15, 0.85, 2)
    return Polygon(local @ rot.T + c)


def nonuniform_scene(index: int, seed: int = 0, radius: float = DEFAULT_RADIUS, bounds: Bounds = Bounds()) -> Environment:
    """3-5 obstacles: one L-shaped (a concavity), the rest hulls of random point splatters."""
    rng = substream(seed, STREAM_SCENE, _NONUNIFORM, index)
    count = int(rng.integers(3, 6))

    def make(rng, k):
        return _notched(rng, bounds) if k == 0 else _splatter(rng, bounds)

    return _place(rng, make, count, radius, bounds)
