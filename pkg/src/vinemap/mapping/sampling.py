"""Seeded random substreams and Monte Carlo environments drawn from a belief."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..geometry import Environment, PointLocation, Polygon, convex_hull, inflate_obstacle, point_in_polygon, polygons_intersect
from .belief import Belief

# first spawn-key element of each independent random stream
STREAM_PLAN = 0  # (STREAM_PLAN, loop, mc_env)
STREAM_RANDOM = 1  # (STREAM_RANDOM, repetition)
STREAM_SCENE = 2  # (STREAM_SCENE, kind, index)

GROUP_COUNTS = (6, 7, 8)
_EIGHT = np.ones((3, 3), dtype=int)


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the substream `keys` of `seed`; independent of evaluation order."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))))


def cell_groups(occupied: np.ndarray, hit: np.ndarray, count: int) -> list[np.ndarray]:
    """The `count` largest 8-connected groups, with stray hit cells moved to the nearest group.

    Each group is an (m, 2) array of (row, col). Ties in size keep label order.
    """
    occ = occupied | hit
    labels, n = ndimage.label(occ, structure=_EIGHT)
    if n == 0:
        return []
    sizes = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    keep = np.argsort(-sizes, kind="stable")[:count] + 1
    groups = [np.argwhere(labels == lab) for lab in keep]
    stray = np.argwhere(hit & ~np.isin(labels, keep))
    for cell in stray:
        d = [np.min(np.sum((g - cell) ** 2, axis=1)) for g in groups]
        j = int(np.argmin(d))
        groups[j] = np.vstack([groups[j], cell])
    return groups


def _hull_of_cells(cells: np.ndarray, x0: float, y0: float, h: float) -> Polygon:
    r, c = cells[:, 0], cells[:, 1]
    corners = np.concatenate([np.column_stack([x0 + h * (c + dx), y0 + h * (r + dy)]) for dx in (0, 1) for dy in (0, 1)])
    return convex_hull(corners)


def _covers(poly: Polygon, points) -> bool:
    return any(point_in_polygon(q, poly) is PointLocation.INSIDE for q in points)


def hull_groups(groups: list[np.ndarray], hit: np.ndarray, spec, radius: float, keep_clear=()) -> list[Polygon]:
    """Convex obstacles from cell groups, merging any whose inflations touch.

    A hull whose inflation would cover a point of `keep_clear` (a launch
    point) is shrunk to the group's hit cells, or dropped if it has none.
    Hit cells always stay covered: if even the hit-only hull covers the
    point, it is kept as is.
    """
    x0, y0, h = spec.bounds.x0, spec.bounds.y0, spec.cell
    items = []  # (cells, hull, inflated)

    def make(cells):
        hull = _hull_of_cells(cells, x0, y0, h)
        grown = inflate_obstacle(hull, radius)
        if not _covers(grown, keep_clear):
            return cells, hull, grown
        hits = cells[hit[cells[:, 0], cells[:, 1]]]
        if len(hits) == 0:
            return None
        if len(hits) == len(cells):
            return cells, hull, grown
        return make(hits)

    for g in groups:
        it = make(g)
        if it is not None:
            items.append(it)
    i = 0
    while i < len(items):
        for j in range(len(items)):
            if j != i and polygons_intersect(items[i][2], items[j][2]):
                merged = make(np.vstack([items[i][0], items[j][0]]))
                del items[max(i, j)], items[min(i, j)]
                if merged is not None:
                    items.append(merged)
                i = 0
                break
        else:
            i += 1
    return [it[1] for it in items]


def draw_occupancy(belief: Belief, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli draw per cell with the cell's belief as probability."""
    return rng.random(belief.spec.shape) < belief.values


def sample_environment(belief: Belief, rng: np.random.Generator, like: Environment) -> Environment:
    """Draw occupancy per cell from the belief and hull the largest groups into obstacles.

    Bounds, launch points and robot radius are copied from `like`.
    """
    draw = draw_occupancy(belief, rng)
    count = int(rng.choice(GROUP_COUNTS))
    groups = cell_groups(draw, belief.hit, count)
    # a deployment cannot start inside an obstacle
    starts = [lp.position for lp in like.launch_points]
    hulls = hull_groups(groups, belief.hit, belief.spec, like.robot_radius, starts)
    return Environment(tuple(hulls), like.bounds, like.launch_points, like.robot_radius)
