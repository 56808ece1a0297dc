"""Visibility-graph simulator for a vine robot with at most one pre-formed turn.

The robot grows from a launch point. Free growth is a ray cast. On contact
the distal body rotates about its most recent pivot while the tip slides
along the wall, so every bend of the final shape sits on a visibility-graph
vertex (an inflated obstacle corner or the turn point). A turned robot
classifies each contact into one of four morphologies and moves its turn
point accordingly.

Angles are radians internally; `DeploymentAction` carries degrees.

Each run also records `Phase` objects: piecewise descriptions of tip motion
against robot length, which the sensing module replays into sensor streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import (
    EPS_ANG,
    EPS_GEO,
    Environment,
    InvalidVertexError,
    ObstacleSet,
    Point2,
    Polygon,
    Provenance,
    Segment,
    VisibilityGraph,
)
from .kinematics import (
    DEFAULT_MU,
    Morphology,
    boundary_pp_pat,
    classify_angles,
    fl_np_angle,
    mirror_contact,
    pat_fl_angle,
    straight_critical_angle,
)

HALF_PI = 0.5 * math.pi
_CHAIN_SAMPLES = 32  # states checked per chain rotation
_SWEEP_PIECES = 8  # swept polygons emitted per chain rotation


class NonTerminationError(RuntimeError):
    """The main loop exceeded its iteration limit."""


class _LoopLimit(Exception):
    pass


class Termination(str, Enum):
    LENGTH_EXHAUSTED = "length-exhausted"
    STUCK = "stuck"
    FREE_END = "free-end"


@dataclass(frozen=True)
class DeploymentAction:
    launch_point_id: str
    launch_angle: float  # degrees counter-clockwise from +x
    turn_fraction: float | None = None
    turn_angle: float = 0.0  # degrees, positive turns counter-clockwise
    max_length: float = 1.0

    def __post_init__(self):
        if (self.turn_fraction is None) != (self.turn_angle == 0):
            raise ValueError("turn_fraction must be given exactly when turn_angle is non-zero")
        if self.turn_fraction is not None and not (0.0 < self.turn_fraction < 1.0):
            raise ValueError("turn_fraction must lie in (0, 1)")
        if not self.max_length > 0:
            raise ValueError("max_length must be positive")

    @property
    def turn_length(self) -> float | None:
        return None if self.turn_fraction is None else self.turn_fraction * self.max_length

    @property
    def is_turning(self) -> bool:
        return self.turn_fraction is not None


@dataclass(frozen=True)
class ShapeVertex:
    point: Point2
    kind: str  # launch | pivot | turn | tip


@dataclass(frozen=True)
class RobotShape:
    vertices: tuple[ShapeVertex, ...]

    @property
    def points(self) -> list[Point2]:
        return [v.point for v in self.vertices]

    @property
    def length(self) -> float:
        p = self.points
        return sum(math.dist(p[i], p[i + 1]) for i in range(len(p) - 1))

    @property
    def tip(self) -> Point2:
        return self.vertices[-1].point


@dataclass(frozen=True)
class ContactEvent:
    kind: str  # contact | skim | stuck | wrap | turn | hug | PP | PaT | FL | NP
    point: Point2
    length: float
    theta_c: float = math.nan
    index: int = -1


@dataclass(frozen=True)
class Phase:
    """Tip motion over robot lengths [start, end].

    free:  tip moves from tip0 along `heading`.
    slide: straight body about `anchor` (arc length `anchor_length`), tip on
           the wall line tip0 -> tip1.
    hug:   body lies along the wall, tip moves tip0 -> tip1.
    chain: turned body B=anchor, segment l_b, bend angle `bend`, tip on the
           wall line tip0 -> tip1.
    lock:  tip fixed at tip0, turn point moves turn0 -> turn1 on the circle
           of radius l_b about the anchor.
    """

    kind: str
    start: float
    end: float
    anchor: Point2
    anchor_length: float
    tip0: Point2
    tip1: Point2
    heading: float = 0.0
    l_b: float = 0.0
    bend: float = 0.0
    turn0: Point2 | None = None
    turn1: Point2 | None = None
    wall: int = -1
    morphology: str = ""

    @property
    def in_contact(self) -> bool:
        return self.kind != "free"


@dataclass(frozen=True)
class DeploymentResult:
    action: DeploymentAction
    shape: RobotShape
    walls_hit: tuple[Segment, ...]
    wall_contacts: tuple[Segment, ...]  # walls_hit moved onto the true obstacle edges
    wall_edges: tuple[int, ...]  # inflated edge index of each walls_hit entry
    swept_area: tuple[Polygon, ...]
    termination: Termination
    flagged: bool = False
    events: tuple[ContactEvent, ...] = ()
    phases: tuple[Phase, ...] = ()

    @property
    def length(self) -> float:
        return self.shape.length


@dataclass
class SimState:
    node: Point2  # tip
    heading: float
    max_length: float
    graph: VisibilityGraph
    pivot: int
    pivot_point: Point2
    pivot_length: float = 0.0
    turning: bool = False
    turn_point: Point2 | None = None
    turn_index: int = -1
    l_b: float = 0.0
    bend: float = 0.0
    tip_vertex: int = -1
    grazes: list[int] = field(default_factory=list)  # touched corners on the distal segment
    grazes_lb: list[int] = field(default_factory=list)  # touched corners before the turn

    @property
    def length(self) -> float:
        if self.turning:
            return self.pivot_length + self.l_b + math.dist(self.node, self.turn_point)
        return self.pivot_length + math.dist(self.node, self.pivot_point)

    @property
    def remaining(self) -> float:
        return max(0.0, self.max_length - self.length)


# -- small geometric helpers ------------------------------------------------------


def _sub(a, b) -> tuple[float, float]:
    return a[0] - b[0], a[1] - b[1]


def _cross(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def _dot(a, b) -> float:
    return a[0] * b[0] + a[1] * b[1]


def _unsigned_angle(a, b) -> float:
    return abs(math.atan2(_cross(a, b), _dot(a, b)))


def _triangle(a, b, c) -> Polygon | None:
    if abs(_cross(_sub(b, a), _sub(c, a))) < 1e-14:
        return None
    return Polygon((a, b, c), validate=False)


def _crossing(a, b, c, d) -> Point2 | None:
    """Proper intersection point of segments ab and cd."""
    r, q = _sub(b, a), _sub(d, c)
    den = _cross(r, q)
    if abs(den) < 1e-300:
        return None
    w = _sub(c, a)
    t = _cross(w, q) / den
    u = _cross(w, r) / den
    if 1e-12 < t < 1 - 1e-12 and 1e-12 < u < 1 - 1e-12:
        return Point2(a[0] + t * r[0], a[1] + t * r[1])
    return None


def _quad_triangles(a, b, c, d) -> list[tuple]:
    """Triangles covering the region bounded by the closed path a-b-c-d."""
    x = _crossing(a, b, c, d)
    if x is not None:
        return [(a, x, d), (b, c, x)]
    x = _crossing(b, c, d, a)
    if x is not None:
        return [(a, b, x), (c, d, x)]
    pts = (a, b, c, d)
    turns = [_cross(_sub(pts[(i + 1) % 4], pts[i]), _sub(pts[(i + 2) % 4], pts[(i + 1) % 4])) for i in range(4)]
    total = sum(turns)
    for i in range(4):
        # the vertex after a turn against the overall orientation is reflex
        if turns[i] * total < 0:
            j = (i + 1) % 4
            return [(pts[j], pts[(j + 1) % 4], pts[(j + 2) % 4]), (pts[j], pts[(j + 2) % 4], pts[(j + 3) % 4])]
    return [(a, b, c), (a, c, d)]


def _point_at_distance(center, x, q, ell: float) -> Point2:
    """Point on segment x -> q at distance ell from center (distance grows along it)."""
    dx, dy = q[0] - x[0], q[1] - x[1]
    wx, wy = x[0] - center[0], x[1] - center[1]
    a = dx * dx + dy * dy
    if a <= 0:
        return Point2(*x)
    b = 2 * (wx * dx + wy * dy)
    c = wx * wx + wy * wy - ell * ell
    disc = max(0.0, b * b - 4 * a * c)
    s = min(1.0, max(0.0, (-b + math.sqrt(disc)) / (2 * a)))
    return Point2(x[0] + s * dx, x[1] + s * dy)


def chain_pose(base, l_b: float, bend: float, tip) -> tuple[float, Point2, float] | None:
    """Turned body with its tip at `tip`: (angle of B->T, turn point, L_a).

    The body runs base -> T (length l_b) and bends by the signed angle
    `bend` at T. Returns None when no such chain reaches the tip.
    """
    cx, cy = tip[0] - base[0], tip[1] - base[1]
    lc = math.hypot(cx, cy)
    sb = l_b * math.sin(abs(bend))
    if lc <= 0 or sb > lc:
        return None
    gamma = math.asin(sb / lc)
    theta_b = math.atan2(cy, cx) - bend + math.copysign(gamma, bend)
    l_a = -l_b * math.cos(bend) + math.sqrt(max(0.0, lc * lc - sb * sb))
    if l_a <= 0:
        return None
    t = Point2(base[0] + l_b * math.cos(theta_b), base[1] + l_b * math.sin(theta_b))
    return theta_b, t, l_a


def _chain_arrays(base, l_b, bend, qx, qy):
    cx, cy = qx - base[0], qy - base[1]
    lc = np.hypot(cx, cy)
    sb = l_b * math.sin(abs(bend))
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = sb / lc
        ok = (lc > 0) & (ratio <= 1.0)
        gamma = np.arcsin(np.clip(ratio, 0.0, 1.0))
        theta_b = np.arctan2(cy, cx) - bend + np.copysign(gamma, bend)
        l_a = -l_b * math.cos(bend) + np.sqrt(np.maximum(0.0, lc * lc - sb * sb))
    ok &= l_a > 0
    tx = base[0] + l_b * np.cos(theta_b)
    ty = base[1] + l_b * np.sin(theta_b)
    return theta_b, tx, ty, np.where(ok, l_a, np.nan)


def friction_lock_turn_point(base, l_b: float, contact, heading: float, l_a_min: float, near) -> Point2 | None:
    """Turn point on the line through the contact at `heading`, l_b from the base.

    Solves |contact - s*u - base| = l_b for s > l_a_min (the body must grow)
    and keeps the root nearest `near`. None when no real root qualifies.
    """
    ux, uy = math.cos(heading), math.sin(heading)
    wx, wy = contact[0] - base[0], contact[1] - base[1]
    uw = ux * wx + uy * wy
    disc = uw * uw - (wx * wx + wy * wy - l_b * l_b)
    if disc < 0:
        return None
    r = math.sqrt(disc)
    best = None
    for s in (uw - r, uw + r):
        if s <= l_a_min + EPS_GEO:
            continue
        p = Point2(contact[0] - s * ux, contact[1] - s * uy)
        if best is None or math.dist(p, near) < math.dist(best, near):
            best = p
    return best


def _arc_point(base, l_b: float, t0, t1, contact, reach: float) -> Point2 | None:
    """Point on the short arc from t0 to t1 about `base` at distance `reach` from the contact."""
    a0 = math.atan2(t0[1] - base[1], t0[0] - base[0])
    da = math.remainder(math.atan2(t1[1] - base[1], t1[0] - base[0]) - a0, 2 * math.pi)

    def gap(u):
        a = a0 + u * da
        return math.dist((base[0] + l_b * math.cos(a), base[1] + l_b * math.sin(a)), contact) - reach

    g0, g1 = gap(0.0), gap(1.0)
    if g0 * g1 > 0:
        return None
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if (gap(mid) > 0) == (g1 > 0):
            hi = mid
        else:
            lo = mid
    a = a0 + lo * da
    return Point2(base[0] + l_b * math.cos(a), base[1] + l_b * math.sin(a))


# -- public pieces of the contact logic -------------------------------------------


@dataclass(frozen=True)
class Collision:
    kind: str  # slide | skim | stuck
    edge: int = -1  # inflated edge slid along
    destination: int = -1  # corner the tip slides toward
    angle: float = math.nan  # angle between heading and slide direction


def straight_stuck(angle: float, length: float, radius: float, mu: float) -> bool:
    """Straight-robot buckling test for a heading-to-slide-direction angle."""
    if radius <= 0:
        crit = math.atan2(1.0, mu)
    else:
        crit = straight_critical_angle(max(length, 0.0) / radius, mu)
    return angle > crit


def resolve_collision(
    obs: ObstacleSet,
    kind: str,
    index: int,
    point,
    heading: float,
    body_length: float,
    radius: float,
    mu: float = DEFAULT_MU,
    check_stuck: bool = True,
) -> Collision:
    """Skim, slide or stuck for a tip meeting an edge or a corner.

    `body_length` is the free length from the current pivot to the tip,
    which sets the slenderness for the buckling test.
    """
    h = (math.cos(heading), math.sin(heading))
    if kind == "edge":
        a, b = index, int(obs.next[index])
        e = (float(obs.ex[index]), float(obs.ey[index]))
        dest = b if _dot(h, e) > 0 else a
        angle = _unsigned_angle(h, _sub(obs.points[dest], point))
        if check_stuck and straight_stuck(angle, body_length, radius, mu):
            return Collision("stuck", index, dest, angle)
        return Collision("slide", index, dest, angle)
    v = index
    if not obs.enters(v, h[0], h[1]):
        return Collision("skim")
    options = []
    for edge, dest in ((v, int(obs.next[v])), (int(obs.prev[v]), int(obs.prev[v]))):
        ang = _unsigned_angle(h, _sub(obs.points[dest], obs.points[v]))
        if ang < HALF_PI - EPS_ANG:
            options.append((ang, edge, dest))
    if not options:
        return Collision("stuck")
    ang, edge, dest = min(options)
    if check_stuck and straight_stuck(ang, body_length, radius, mu):
        return Collision("stuck", edge, dest, ang)
    return Collision("slide", edge, dest, ang)


def classify_turned_contact(
    theta_c: float, bend: float, l_a: float, l_b: float, mu: float, radius: float
) -> tuple[Morphology, tuple[float, float, float], float]:
    """Morphology of a turned contact; also returns the boundaries and the
    contact angle in the mirrored (non-negative bend) frame."""
    tc, tt = mirror_contact(theta_c, bend)
    la, lb = max(l_a, 1e-9), max(l_b, 1e-9)
    b = (boundary_pp_pat(tt, mu), pat_fl_angle(tt, la, lb, mu, radius), fl_np_angle(tt, la, lb, mu, radius))
    return classify_angles(tc, *b), b, tc


def update_turn_vertex(graph: VisibilityGraph, old, new) -> VisibilityGraph:
    """Move the turn vertex at `old` to `new`, recomputing its edges."""
    i = graph.index_of(old)
    if i is None:
        raise InvalidVertexError(f"no vertex at {tuple(old)}")
    return graph.relocated(i, new)


def wrap_check(obs: ObstacleSet, origin, candidate, destination) -> bool:
    """True when the chord origin -> destination is blocked but the bent path
    through `candidate` is clear, so the body must wrap around it."""
    if obs.line_of_sight(origin, destination):
        return False
    return obs.line_of_sight(origin, candidate) and obs.line_of_sight(candidate, destination)


def body_collision_during_pivot(
    obs: ObstacleSet,
    base,
    l_b: float,
    bend: float,
    tip_start,
    tip_end,
    exclude: tuple[int, ...] = (),
    samples: int = _CHAIN_SAMPLES,
) -> tuple[float, int, str] | None:
    """First corner met while a turned chain slides its tip start -> end.

    Returns (fraction of the tip path, corner index, "lb" or "la") for the
    earliest corner crossed by the pre-turn segment (within l_b of `base`)
    or by the post-turn segment, or None if the sweep is clear.
    """
    n = obs.size
    if n == 0:
        return None
    us = np.linspace(0.0, 1.0, samples + 1)
    dx, dy = tip_end[0] - tip_start[0], tip_end[1] - tip_start[1]

    def pose(u):
        u = np.asarray(u, dtype=float)
        qx, qy = tip_start[0] + u * dx, tip_start[1] + u * dy
        _, tx, ty, la = _chain_arrays(base, l_b, bend, qx, qy)
        return qx, qy, tx, ty

    qx, qy, tx, ty = pose(us)
    mask = np.ones(n, dtype=bool)
    for k in exclude:
        if 0 <= k < n:
            mask[k] = False
    vx, vy = obs.x[None, :], obs.y[None, :]

    def side_and_proj(qx, qy, tx, ty, seg):
        if seg == "lb":
            ax, ay, bx, by = base[0], base[1], tx, ty
        else:
            ax, ay, bx, by = tx, ty, qx, qy
        ax = np.asarray(ax, dtype=float)[..., None] + 0 * vx
        ay = np.asarray(ay, dtype=float)[..., None] + 0 * vy
        ex = np.asarray(bx, dtype=float)[..., None] - ax
        ey = np.asarray(by, dtype=float)[..., None] - ay
        ll = np.maximum(ex * ex + ey * ey, 1e-300)
        f = (ex * (vy - ay) - ey * (vx - ax)) / np.sqrt(ll)
        s = ((vx - ax) * ex + (vy - ay) * ey) / ll
        return f, s

    best = None
    for seg in ("lb", "la"):
        f, s = side_and_proj(qx, qy, tx, ty, seg)
        sign = np.sign(np.where(np.abs(f) <= EPS_GEO, 0.0, f))
        change = (sign[:-1] * sign[1:] < 0) | ((sign[:-1] != 0) & (sign[1:] == 0))
        near = ((s[:-1] > -0.2) & (s[:-1] < 1.2)) | ((s[1:] > -0.2) & (s[1:] < 1.2))
        hits = np.argwhere(change & near & mask[None, :])
        seen = set()
        for i, k in hits:
            if k in seen:
                continue
            seen.add(k)
            lo, hi = us[i], us[i + 1]
            flo = f[i, k]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                fm, _ = side_and_proj(*pose([mid]), seg)
                fm = fm[0, k]
                if np.sign(fm) == np.sign(flo) and abs(fm) > EPS_GEO:
                    lo, flo = mid, fm
                else:
                    hi = mid
            # keep the last state before the crossing so the sweep stays clear
            _, sp = side_and_proj(*pose([lo]), seg)
            if -1e-9 <= sp[0, k] <= 1 + 1e-9 and (best is None or lo < best[0]):
                best = (float(lo), int(k), seg)
    return best


# -- the engine -------------------------------------------------------------------------


class _Run:
    def __init__(self, env: Environment, action: DeploymentAction, mu: float, turn: tuple[float, float] | None = None):
        self.env = env
        self.obs = env.obstacle_set
        self.radius = env.robot_radius
        self.mu = mu
        self.action = action
        lp = env.launch(action.launch_point_id)
        self.launch = lp.position
        self.max_len = action.max_length
        self.theta_t = math.radians(action.turn_angle) if action.is_turning else 0.0
        self.pending = action.turn_length
        if turn is not None:
            self.pending, self.theta_t = turn
        if self.theta_t == 0.0:
            # a zero turn never engages the turn machinery
            self.pending = None
        graph = env.visibility_graph
        idx = -1
        for i, prov in enumerate(graph.provenance):
            if prov.kind == "launch" and prov.label == lp.id:
                idx = i
                break
        self.st = SimState(
            node=lp.position,
            heading=math.radians(action.launch_angle),
            max_length=self.max_len,
            graph=graph,
            pivot=idx,
            pivot_point=lp.position,
            bend=self.theta_t,
        )
        self.shape: list[ShapeVertex] = [ShapeVertex(lp.position, "launch")]
        self.walls: list[tuple[int, Point2, Point2]] = []
        self.swept: list[Polygon] = []
        self.events: list[ContactEvent] = []
        self.phases: list[Phase] = []
        self.termination = Termination.STUCK
        self.iterations = 0
        self.limit = max(10 * len(graph), 50)

    # bookkeeping ----------------------------------------------------------------

    def _tick(self):
        self.iterations += 1
        if self.iterations > self.limit:
            raise _LoopLimit

    def _event(self, kind, point, theta_c=math.nan, index=-1):
        self.events.append(ContactEvent(kind, Point2(*point), self.st.length, theta_c, index))

    def _add_shape(self, p, kind):
        p = Point2(*p)
        if math.dist(p, self.shape[-1].point) > EPS_GEO:
            self.shape.append(ShapeVertex(p, kind))

    def _wall(self, k, p0, p1):
        if math.dist(p0, p1) > 1e-12:
            self.walls.append((k, Point2(*p0), Point2(*p1)))

    def _sweep(self, a, b, c):
        t = _triangle(a, b, c)
        if t is not None:
            self.swept.append(t)

    def _theta_c(self, k, heading) -> float:
        return (math.atan2(self.obs.ey[k], self.obs.ex[k]) - heading) % math.pi

    def _set_pivot(self, w):
        st = self.st
        p = st.graph.points[w]
        self._add_shape(p, "pivot")
        st.pivot_length += math.dist(p, st.pivot_point)
        st.pivot = w
        st.pivot_point = p

    def _stuck(self, point):
        self._event("stuck", point)
        self.termination = Termination.STUCK
        return None

    # main loop --------------------------------------------------------------------

    def run(self) -> tuple[bool]:
        st = self.st
        if st.pivot < 0:
            # launch point inside an obstacle
            return self._stuck(st.node) or False
        step = (self._free, ())
        try:
            while step is not None:
                self._tick()
                fn, args = step
                step = fn(*args)
        except _LoopLimit:
            return True
        return False

    def _free(self):
        st = self.st
        ox, oy = st.node
        hx, hy = math.cos(st.heading), math.sin(st.heading)
        used = st.length
        rem = max(0.0, self.max_len - used)
        exit_d = self.env.bounds.exit_distance(st.node, hx, hy)
        reach = min(rem, exit_d)
        d_turn = math.inf
        if self.pending is not None and not st.turning:
            d_turn = max(0.0, self.pending - used)
        cap = min(reach, d_turn)
        hit, grazes = self.obs.cast(ox, oy, hx, hy, cap, st.tip_vertex)
        d_hit = hit.distance if hit is not None else math.inf
        if d_turn <= reach and d_turn < d_hit - EPS_GEO:
            q = Point2(ox + d_turn * hx, oy + d_turn * hy)
            st.grazes.extend(k for t, k in grazes if t < d_turn - EPS_GEO)
            self._phase_free(q, used)
            st.node = q
            return (self._start_turn, ())
        if hit is None:
            q = Point2(ox + reach * hx, oy + reach * hy)
            st.grazes.extend(k for _, k in grazes)
            self._phase_free(q, used)
            st.node = q
            self.termination = Termination.LENGTH_EXHAUSTED if rem <= exit_d + EPS_GEO else Termination.FREE_END
            return None
        st.grazes.extend(k for _, k in grazes)
        self._phase_free(hit.point, used)
        st.node = hit.point
        if hit.kind == "edge":
            st.tip_vertex = -1
            return (self._edge_contact, (hit.index, hit.point))
        st.tip_vertex = hit.index
        return (self._vertex_contact, (hit.index,))

    def _phase_free(self, q, used):
        st = self.st
        d = math.dist(st.node, q)
        if d > 0:
            anchor = st.turn_point if st.turning else st.pivot_point
            alen = st.pivot_length + st.l_b if st.turning else st.pivot_length
            self.phases.append(Phase("free", used, used + d, anchor, alen, st.node, Point2(*q), heading=st.heading))

    def _start_turn(self):
        st = self.st
        q = st.node
        self.pending = None
        try:
            st.graph, st.turn_index = st.graph.with_vertex(q, Provenance("turn", label="turn"))
        except InvalidVertexError:
            return self._stuck(q)
        st.turn_point = q
        st.l_b = math.dist(q, st.pivot_point)
        st.turning = True
        st.bend = self.theta_t
        st.grazes_lb = st.grazes
        st.grazes = []
        st.heading += self.theta_t
        st.tip_vertex = -1
        self._event("turn", q)
        return (self._free, ())

    # straight contacts ----------------------------------------------------------------

    def _wrap(self, sigma: int) -> bool:
        """Pivot on the farthest touched corner whose obstacle blocks the rotation."""
        st = self.st
        if not st.grazes:
            return False
        P = st.pivot_point
        d = _sub(st.node, P)
        best, best_d = -1, -1.0
        for g in st.grazes:
            v = self.obs.points[g]
            for j in (int(self.obs.next[g]), int(self.obs.prev[g])):
                if sigma * _cross(d, _sub(self.obs.points[j], v)) > EPS_GEO:
                    dd = math.dist(v, P)
                    if dd > best_d:
                        best, best_d = g, dd
                    break
        if best < 0:
            return False
        self._set_pivot(best)
        st.grazes = [g for g in st.grazes if math.dist(self.obs.points[g], P) > best_d + EPS_GEO]
        self._event("wrap", self.obs.points[best], index=best)
        return True

    def _edge_contact(self, k, x):
        st = self.st
        if st.turning:
            return (self._turned_contact, (k, x))
        h = (math.cos(st.heading), math.sin(st.heading))
        col = resolve_collision(self.obs, "edge", k, x, st.heading, 0.0, self.radius, self.mu, check_stuck=False)
        dest = self.obs.points[col.destination]
        self._event("contact", x, self._theta_c(k, st.heading), k)
        if straight_stuck(col.angle, math.dist(x, st.pivot_point), self.radius, self.mu):
            return self._stuck(x)
        self._wrap(1 if _cross(h, _sub(dest, x)) > 0 else -1)
        return self._slide(k, x, col.destination)

    def _vertex_contact(self, v):
        st = self.st
        p = self.obs.points[v]
        col = resolve_collision(self.obs, "vertex", v, p, st.heading, 0.0, self.radius, self.mu, check_stuck=False)
        if col.kind == "skim":
            st.grazes.append(v)
            st.tip_vertex = v
            self._event("skim", p, index=v)
            return (self._free, ())
        if col.kind == "stuck":
            return self._stuck(p)
        if st.turning:
            return (self._turned_contact, (col.edge, p))
        h = (math.cos(st.heading), math.sin(st.heading))
        dest = self.obs.points[col.destination]
        self._event("contact", p, self._theta_c(col.edge, st.heading), col.edge)
        if straight_stuck(col.angle, math.dist(p, st.pivot_point), self.radius, self.mu):
            return self._stuck(p)
        self._wrap(1 if _cross(h, _sub(dest, p)) > 0 else -1)
        return self._slide(col.edge, p, col.destination)

    def _resume_straight(self, k, x):
        """Continue a straight slide after the turn stopped moving (no stuck test)."""
        st = self.st
        h = (math.cos(st.heading), math.sin(st.heading))
        e = (float(self.obs.ex[k]), float(self.obs.ey[k]))
        dest = int(self.obs.next[k]) if _dot(h, e) > 0 else k
        self._wrap(1 if _cross(h, _sub(self.obs.points[dest], x)) > 0 else -1)
        return self._slide(k, x, dest)

    def _slide(self, k, x, c):
        """Rotate the straight distal body about its pivot while the tip runs
        along edge k toward corner c, picking up new pivots on the way."""
        st = self.st
        obs = self.obs
        cpt = obs.points[c]
        while True:
            self._tick()
            P = st.pivot_point
            u = _sub(x, P)
            v = _sub(cpt, P)
            cr = _cross(u, v)
            dist_c = math.hypot(*v)
            best = -1
            qstar = cpt
            if abs(cr) > EPS_GEO * dist_c:
                sigma = 1.0 if cr > 0 else -1.0
                alpha_c = abs(math.atan2(cr, _dot(u, v)))
                best_a, best_d = math.inf, math.inf
                for w in st.graph.adjacency[st.pivot]:
                    if w >= obs.size or w == c:
                        continue
                    wv = _sub(obs.points[w], P)
                    a = sigma * math.atan2(_cross(u, wv), _dot(u, wv))
                    if a <= EPS_ANG or a > alpha_c + EPS_ANG:
                        continue
                    dw = math.hypot(*wv)
                    if a >= alpha_c - EPS_ANG and dw >= dist_c - EPS_GEO:
                        continue
                    if a < best_a - EPS_ANG or (abs(a - best_a) <= EPS_ANG and dw < best_d):
                        best, best_a, best_d = w, a, dw
                if best >= 0:
                    wv = _sub(obs.points[best], P)
                    den = _cross(wv, _sub(cpt, x))
                    s = -_cross(wv, u) / den if abs(den) > 1e-300 else 1.0
                    s = min(1.0, max(0.0, s))
                    qstar = Point2(x[0] + s * (cpt[0] - x[0]), x[1] + s * (cpt[1] - x[1]))
            l0 = st.pivot_length + math.hypot(*u)
            l1 = st.pivot_length + math.dist(qstar, P)
            if self.pending is not None and l0 - EPS_GEO <= self.pending < l1 - EPS_GEO:
                q = _point_at_distance(P, x, qstar, self.pending - st.pivot_length)
                self._slide_piece(k, x, q, l0)
                st.node = q
                st.heading = math.atan2(q[1] - P[1], q[0] - P[0])
                return (self._turn_on_wall, (k, q, c))
            out = self._exit_param(x, qstar)
            if out is not None:
                qb = Point2(x[0] + out * (qstar[0] - x[0]), x[1] + out * (qstar[1] - x[1]))
                if st.pivot_length + math.dist(qb, P) <= self.max_len:
                    self._slide_piece(k, x, qb, l0)
                    st.node = qb
                    st.heading = math.atan2(qb[1] - P[1], qb[0] - P[0])
                    self.termination = Termination.FREE_END
                    return None
            if l1 > self.max_len:
                q = _point_at_distance(P, x, qstar, self.max_len - st.pivot_length)
                self._slide_piece(k, x, q, l0)
                st.node = q
                st.heading = math.atan2(q[1] - P[1], q[0] - P[0])
                self.termination = Termination.LENGTH_EXHAUSTED
                return None
            self._slide_piece(k, x, qstar, l0)
            st.node = qstar
            st.heading = math.atan2(qstar[1] - P[1], qstar[0] - P[0])
            st.grazes = []
            if best < 0:
                st.tip_vertex = c
                return (self._vertex_contact, (c,))
            self._set_pivot(best)
            self._event("wrap", obs.points[best], index=best)
            x = qstar

    def _exit_param(self, x, q) -> float | None:
        """Fraction along x -> q where the tip leaves the bounds, if it does."""
        bd = self.env.bounds
        if bd.contains(q):
            return None
        d = math.dist(x, q)
        if d <= 0 or not bd.contains(x):
            return 0.0
        t = bd.exit_distance(x, (q[0] - x[0]) / d, (q[1] - x[1]) / d) / d
        return min(1.0, max(0.0, t))

    def _slide_piece(self, k, x, q, l0):
        st = self.st
        P = st.pivot_point
        self._wall(k, x, q)
        self._sweep(P, x, q)
        l1 = st.pivot_length + math.dist(q, P)
        if l1 > l0:
            self.phases.append(Phase("slide", l0, l1, P, st.pivot_length, Point2(*x), Point2(*q), wall=k))

    def _turn_on_wall(self, k, q, c):
        """The turn forms while the tip slides along a wall."""
        st = self.st
        turn_len = self.pending
        self.pending = None
        h2 = st.heading + self.theta_t
        ex, ey = float(self.obs.ex[k]), float(self.obs.ey[k])
        el = math.hypot(ex, ey)
        nx, ny = ey / el, -ex / el  # toward the obstacle interior
        if math.cos(h2) * nx + math.sin(h2) * ny < -EPS_ANG:
            self.pending = turn_len
            return self._start_turn()
        # the turned tip presses into the wall: freeze the turn and hug the wall
        try:
            st.graph, ti = st.graph.with_vertex(q, Provenance("turn", label="turn"))
        except InvalidVertexError:
            return self._stuck(q)
        self._add_shape(q, "turn")
        st.pivot, st.pivot_point, st.pivot_length = ti, Point2(*q), turn_len
        cpt = self.obs.points[c]
        st.heading = math.atan2(cpt[1] - q[1], cpt[0] - q[0])
        self._event("hug", q, 0.0, k)
        end = turn_len + math.dist(q, cpt)
        tip = cpt
        if end > self.max_len:
            ell = self.max_len - turn_len
            tip = Point2(q[0] + ell * math.cos(st.heading), q[1] + ell * math.sin(st.heading))
            end = self.max_len
        self._wall(k, q, tip)
        if end > turn_len:
            self.phases.append(Phase("hug", turn_len, end, st.pivot_point, turn_len, Point2(*q), tip, wall=k, morphology="hug"))
        st.node = tip
        st.grazes = []
        if tip is not cpt:
            self.termination = Termination.LENGTH_EXHAUSTED
            return None
        st.tip_vertex = c
        return (self._vertex_contact, (c,))

    # turned contacts -------------------------------------------------------------------

    def _freeze_turn(self) -> bool:
        st = self.st
        try:
            st.graph = st.graph.relocated(st.turn_index, st.turn_point)
        except InvalidVertexError:
            return False
        self._add_shape(st.turn_point, "turn")
        st.pivot_length += st.l_b
        st.pivot = st.turn_index
        st.pivot_point = st.turn_point
        st.turning = False
        st.turn_point = None
        st.turn_index = -1
        st.l_b = 0.0
        st.grazes_lb = []
        return True

    def _turned_contact(self, k, x):
        st = self.st
        theta_c = self._theta_c(k, st.heading)
        if theta_c < EPS_ANG or theta_c > math.pi - EPS_ANG:
            return self._stuck(x)
        l_a = math.dist(x, st.turn_point)
        m, (b1, b2, b3), tc = classify_turned_contact(theta_c, st.bend, l_a, st.l_b, self.mu, self.radius)
        self._event(m.short, x, theta_c, k)
        sense = 1 if st.bend > 0 else -1
        if m is Morphology.POSITIVE_PIVOT:
            return self._chain(k, x, sense, m)
        if m is Morphology.NEGATIVE_PIVOT:
            return self._chain(k, x, -sense, m)
        if m is Morphology.PIVOT_AT_TURN:
            return self._pivot_at_turn(k, x)
        return self._friction_lock(k, x, theta_c, tc, b2, b3)

    def _pivot_at_turn(self, k, x):
        st = self.st
        sense = 1 if st.bend > 0 else -1
        if not self._freeze_turn():
            return self._stuck(x)
        T = st.pivot_point
        a, b = k, int(self.obs.next[k])
        dest = None
        for e in (a, b):
            if sense * _cross(_sub(x, T), _sub(self.obs.points[e], T)) > 0 and math.dist(self.obs.points[e], x) > EPS_GEO:
                dest = e
        if dest is None:
            return self._stuck(x)
        self._wrap(sense)
        return self._slide(k, x, dest)

    def _lock_fallback(self, k, x):
        """Turn point cannot move: it becomes a pivot and the straight rule applies."""
        st = self.st
        if not self._freeze_turn():
            return self._stuck(x)
        col = resolve_collision(self.obs, "edge", k, x, st.heading, math.dist(x, st.pivot_point), self.radius, self.mu)
        if col.kind == "stuck" or math.dist(self.obs.points[col.destination], x) <= EPS_GEO:
            return self._stuck(x)
        h = (math.cos(st.heading), math.sin(st.heading))
        self._wrap(1 if _cross(h, _sub(self.obs.points[col.destination], x)) > 0 else -1)
        return self._slide(k, x, col.destination)

    def _chain_clear(self, B, T, q) -> bool:
        vis = self.obs.visible(np.array([B[0], T[0]]), np.array([B[1], T[1]]), np.array([T[0], q[0]]), np.array([T[1], q[1]]))
        return bool(vis.all())

    def _friction_lock(self, k, x, theta_c, tc, b2, b3):
        st = self.st
        B, T, l_b = st.pivot_point, st.turn_point, st.l_b
        to_pat = abs(tc - b2) <= abs(tc - b3)
        star = b2 if to_pat else b3
        if st.bend < 0:
            star = math.pi - star
        theta_w = st.heading + theta_c
        h_star = theta_w - star
        l_a = math.dist(x, T)
        t_new = friction_lock_turn_point(B, l_b, x, h_star, l_a, T)
        if t_new is None:
            return self._lock_fallback(k, x)
        l0 = st.length
        new_len = st.pivot_length + l_b + math.dist(x, t_new)
        exhausted = new_len > self.max_len
        if exhausted:
            t_part = _arc_point(B, l_b, T, t_new, x, self.max_len - st.pivot_length - l_b)
            t_new = t_new if t_part is None else t_part
            new_len = self.max_len
        if not self._lock_region_clear(B, T, t_new, x):
            return self._lock_fallback(k, x)
        self._lock_piece(k, x, T, t_new, l0, new_len)
        st.turn_point = t_new
        if exhausted:
            st.heading = math.atan2(x[1] - t_new[1], x[0] - t_new[0])
            self._rebend()
            self.termination = Termination.LENGTH_EXHAUSTED
            return None
        st.heading = h_star
        self._rebend()
        if to_pat:
            self._event("PaT", x, self._theta_c(k, st.heading), k)
            return self._pivot_at_turn(k, x)
        self._event("NP", x, self._theta_c(k, st.heading), k)
        sense = 1 if st.bend > 0 else -1
        return self._chain(k, x, -sense, Morphology.NEGATIVE_PIVOT)

    def _lock_region_clear(self, B, T0, T1, x) -> bool:
        for poly in (_triangle(B, T0, T1), _triangle(T0, x, T1)):
            if poly is not None and self.obs.size:
                a, b, c = poly.vertices
                if _strictly_in_triangle(self.obs.x, self.obs.y, a, b, c).any():
                    return False
        return self._chain_clear(B, T1, x)

    def _rebend(self):
        st = self.st
        a = _sub(st.turn_point, st.pivot_point)
        b = _sub(st.node, st.turn_point)
        bend = math.atan2(_cross(a, b), _dot(a, b))
        if abs(bend) > 1e-12:
            st.bend = bend

    def _lock_piece(self, k, x, T0, T1, l0, l1):
        st = self.st
        B = st.pivot_point
        self._sweep(B, T0, T1)
        self._sweep(T0, x, T1)
        if l1 > l0:
            self.phases.append(
                Phase("lock", l0, l1, B, st.pivot_length, Point2(*x), Point2(*x), l_b=st.l_b,
                      bend=st.bend, turn0=Point2(*T0), turn1=Point2(*T1), wall=k, morphology="FL")
            )

    def _chain(self, k, x, sigma, m):
        """Turned body rotates with its tip on edge k (positive/negative pivot)."""
        st = self.st
        obs = self.obs
        B, l_b, bend = st.pivot_point, st.l_b, st.bend
        dest = None
        for e in (k, int(obs.next[k])):
            ep = obs.points[e]
            if math.dist(ep, x) > EPS_GEO and sigma * _cross(_sub(x, B), _sub(ep, B)) > 0:
                dest = e
        if dest is None:
            return self._stuck(x)
        D = obs.points[dest]
        us = np.linspace(0.0, 1.0, _CHAIN_SAMPLES + 1)
        qx = x[0] + us * (D[0] - x[0])
        qy = x[1] + us * (D[1] - x[1])
        _, _, _, la = _chain_arrays(B, l_b, bend, qx, qy)

        def la_at(u):
            q = (x[0] + u * (D[0] - x[0]), x[1] + u * (D[1] - x[1]))
            p = chain_pose(B, l_b, bend, q)
            return -math.inf if p is None else p[2]

        la0 = la_at(0.0)
        # growth must lengthen the body; stop where it would shrink
        u_lim, reason = 1.0, "end"
        fin = np.isfinite(la)
        bad = ~fin[1:] | (np.diff(np.where(fin, la, 0.0)) <= 0)
        if la0 == -math.inf or la_at(1e-7) <= la0:
            return self._stuck(x)
        if bad.any():
            j = int(np.argmax(bad))
            lo, hi = us[j], us[j + 1]
            for _ in range(80):
                m1, m2 = lo + (hi - lo) / 3, hi - (hi - lo) / 3
                if la_at(m1) < la_at(m2):
                    lo = m1
                else:
                    hi = m2
            u_lim, reason = 0.5 * (lo + hi), "peak"
        total = lambda u: st.pivot_length + l_b + la_at(u)
        if total(u_lim) > self.max_len:
            lo, hi = 0.0, u_lim
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if total(mid) > self.max_len:
                    hi = mid
                else:
                    lo = mid
            u_lim, reason = lo, "length"
        # corners touched at the start that sit on the moving side
        hit = self._graze_block(B, l_b, bend, x, D, u_lim)
        if hit is None:
            end = (x[0] + u_lim * (D[0] - x[0]), x[1] + u_lim * (D[1] - x[1]))
            exclude = (k, int(obs.next[k]), st.pivot)
            found = body_collision_during_pivot(obs, B, l_b, bend, x, end, exclude)
            if found is not None:
                hit = (found[0] * u_lim, found[1], found[2])
        u_star = u_lim
        if hit is not None and hit[0] <= u_lim:
            u_star, reason = hit[0], hit[2]
        # fallback for edges crossing the sweep with no corner inside
        u_star, reason = self._first_blocked(B, l_b, bend, x, D, u_star, reason)
        qs = Point2(x[0] + u_star * (D[0] - x[0]), x[1] + u_star * (D[1] - x[1]))
        pose = chain_pose(B, l_b, bend, qs)
        if pose is None:
            return self._stuck(x)
        theta_b, t_star, _ = pose
        l0 = st.length
        self._chain_sweep(k, x, D, u_star, l0, m)
        st.turn_point = t_star
        st.node = qs
        st.heading = theta_b + bend
        st.tip_vertex = -1
        st.grazes = []
        if reason == "length":
            self.termination = Termination.LENGTH_EXHAUSTED
            return None
        if reason in ("peak", "blocked"):
            return self._stuck(qs)
        if reason == "end":
            st.tip_vertex = dest
            st.node = D
            return (self._vertex_contact, (dest,))
        v = hit[1]
        vp = obs.points[v]
        if reason == "lb" and math.dist(vp, t_star) > 1e-7:
            st.grazes_lb = []
            d = math.dist(vp, B)
            self._add_shape(vp, "pivot")
            st.pivot_length += d
            st.l_b -= d
            st.pivot = v
            st.pivot_point = vp
            self._event("wrap", vp, index=v)
            return (self._turned_contact, (k, qs))
        if not self._freeze_turn():
            return self._stuck(qs)
        if reason == "la" and math.dist(vp, st.pivot_point) > 1e-7:
            self._set_pivot(v)
            self._event("wrap", vp, index=v)
        return (self._resume_straight, (k, qs))

    def _graze_block(self, B, l_b, bend, x, D, u_lim):
        """Corners already touching the body that block its motion at once."""
        st = self.st
        if not (st.grazes or st.grazes_lb) or u_lim <= 0:
            return None
        du = min(1e-6, u_lim)
        p0 = chain_pose(B, l_b, bend, x)
        p1 = chain_pose(B, l_b, bend, (x[0] + du * (D[0] - x[0]), x[1] + du * (D[1] - x[1])))
        if p0 is None or p1 is None:
            return None
        T0, T1 = p0[1], p1[1]
        q1 = (x[0] + du * (D[0] - x[0]), x[1] + du * (D[1] - x[1]))
        for seg, group, a0, b0, a1, b1 in (("lb", st.grazes_lb, B, T0, B, T1), ("la", st.grazes, T0, x, T1, q1)):
            for g in group:
                v = self.obs.points[g]
                d = _sub(b0, a0)
                moved = _cross(_sub(b1, a1), _sub(v, a1))
                if abs(moved) < 1e-15:
                    continue
                side = -1.0 if moved > 0 else 1.0  # the body moved toward this side of v
                for j in (int(self.obs.next[g]), int(self.obs.prev[g])):
                    if side * _cross(d, _sub(self.obs.points[j], v)) > EPS_GEO:
                        return (0.0, g, seg)
        return None

    def _first_blocked(self, B, l_b, bend, x, D, u_star, reason):
        if self.obs.size == 0 or u_star <= 0:
            return u_star, reason

        def clear(u):
            q = (x[0] + u * (D[0] - x[0]), x[1] + u * (D[1] - x[1]))
            p = chain_pose(B, l_b, bend, q)
            return p is not None and self._chain_clear(B, p[1], q)

        us = np.linspace(0.0, u_star, 9)[1:]
        prev = 0.0
        for u in us:
            if not clear(u):
                lo, hi = prev, u
                for _ in range(50):
                    mid = 0.5 * (lo + hi)
                    if clear(mid):
                        lo = mid
                    else:
                        hi = mid
                return lo, "blocked"
            prev = u
        return u_star, reason

    def _chain_sweep(self, k, x, D, u_star, l0, m):
        st = self.st
        B, l_b, bend = st.pivot_point, st.l_b, st.bend
        us = np.linspace(0.0, u_star, _SWEEP_PIECES + 1)
        prev = None
        for u in us:
            q = Point2(x[0] + u * (D[0] - x[0]), x[1] + u * (D[1] - x[1]))
            p = chain_pose(B, l_b, bend, q)
            if p is None:
                break
            if prev is not None:
                T0, q0 = prev
                self._sweep(B, T0, p[1])
                for tri in _quad_triangles(T0, q0, q, p[1]):
                    self._sweep(*tri)
            prev = (p[1], q)
        qs = Point2(x[0] + u_star * (D[0] - x[0]), x[1] + u_star * (D[1] - x[1]))
        self._wall(k, x, qs)
        p = chain_pose(B, l_b, bend, qs)
        if p is not None:
            l1 = st.pivot_length + l_b + p[2]
            if l1 > l0:
                self.phases.append(
                    Phase("chain", l0, l1, B, st.pivot_length, Point2(*x), Point2(*D), l_b=l_b, bend=bend,
                          wall=k, morphology=m.short)
                )

    # result ----------------------------------------------------------------------------

    def result(self, flagged: bool) -> DeploymentResult:
        st = self.st
        if st.turning:
            self._add_shape(st.turn_point, "turn")
        tip = Point2(*st.node)
        if math.dist(tip, self.shape[-1].point) > EPS_GEO or len(self.shape) == 1:
            self.shape.append(ShapeVertex(tip, "tip"))
        else:
            self.shape[-1] = ShapeVertex(tip, "tip")
        walls = tuple(Segment(a, b) for _, a, b in self.walls)
        edges = tuple(k for k, _, _ in self.walls)
        return DeploymentResult(
            action=self.action,
            shape=RobotShape(tuple(self.shape)),
            walls_hit=walls,
            wall_contacts=tuple(self._true_contacts()),
            wall_edges=edges,
            swept_area=tuple(self.swept),
            termination=self.termination,
            flagged=flagged,
            events=tuple(self.events),
            phases=tuple(self.phases),
        )

    def _true_contacts(self):
        out = []
        for k, p0, p1 in self.walls:
            o, i = int(self.obs.owner[k]), int(self.obs.local[k])
            poly = self.env.obstacles[o]
            n = len(poly.vertices)
            if n != len(self.env.inflated[o].vertices):
                continue
            a, b = poly.vertices[i], poly.vertices[(i + 1) % n]
            e = _sub(b, a)
            ll = _dot(e, e)
            t0 = min(1.0, max(0.0, _dot(_sub(p0, a), e) / ll))
            t1 = min(1.0, max(0.0, _dot(_sub(p1, a), e) / ll))
            if abs(t1 - t0) * math.sqrt(ll) > 1e-12:
                out.append(Segment((a[0] + t0 * e[0], a[1] + t0 * e[1]), (a[0] + t1 * e[0], a[1] + t1 * e[1])))
        return out


def _strictly_in_triangle(px, py, a, b, c, eps: float = EPS_GEO) -> np.ndarray:
    def side(p, q):
        ex, ey = q[0] - p[0], q[1] - p[1]
        el = math.hypot(ex, ey)
        return (ex * (py - p[1]) - ey * (px - p[0])) / el

    s1, s2, s3 = side(a, b), side(b, c), side(c, a)
    return ((s1 > eps) & (s2 > eps) & (s3 > eps)) | ((s1 < -eps) & (s2 < -eps) & (s3 < -eps))


def simulate(
    env: Environment,
    action: DeploymentAction,
    mu: float = DEFAULT_MU,
    strict: bool = False,
    turn: tuple[float, float] | None = None,
) -> DeploymentResult:
    """Grow the robot described by `action` through `env`.

    `turn` overrides the action's turn as (arc length in m, angle in rad).
    A run that exceeds the loop limit is returned with flagged=True, or
    raises NonTerminationError when strict.
    """
    run = _Run(env, action, mu, turn)
    flagged = run.run()
    if flagged and strict:
        raise NonTerminationError(f"loop limit {run.limit} exceeded")
    return run.result(bool(flagged))
