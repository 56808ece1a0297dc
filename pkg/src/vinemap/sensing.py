"""Recover robot shape and wall geometry from tip sensor streams.

A stream is a sequence of (robot length, contact flag, contact angle)
samples. Contact angles follow the simulator convention: counter-clockwise
from the tip heading to the wall tangent, in (0, pi), so the wall angle is
heading + theta_C (mod pi).

`reconstruct` tracks one contact regime at a time (straight pivot, turned
chain, friction lock). Each regime predicts the contact angle from the robot
length; a persistent mismatch marks a regime change and the candidate
successors are fitted to the following samples.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares

from .geometry import EPS_GEO, Environment, GeometryError, Point2, Polygon
from .kinematics import DEFAULT_MU, Morphology
from .simulator import (
    DeploymentResult,
    RobotShape,
    ShapeVertex,
    chain_pose,
    classify_turned_contact,
    friction_lock_turn_point,
)

log = logging.getLogger(__name__)

DEFAULT_RADIUS = 0.0323


class IllConditionedPivotError(ArithmeticError):
    """Pivot offset denominator is too close to zero."""


# -- stream types ------------------------------------------------------------------


@dataclass(frozen=True)
class SensorSample:
    length: float  # m
    contact: bool
    theta_c: float | None = None  # rad, present iff contact

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length >= 0):
            raise ValueError("length must be finite and non-negative")
        if self.contact != (self.theta_c is not None):
            raise ValueError("theta_c must be given exactly when in contact")
        if self.contact and not (0.0 < self.theta_c < math.pi):
            raise ValueError("theta_c must lie in (0, pi)")


@dataclass(frozen=True)
class SensorStream:
    samples: tuple[SensorSample, ...]
    launch: Point2
    launch_angle: float  # rad
    turn: tuple[float, float] | None = None  # (arc length m, angle rad)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "launch", Point2(*map(float, self.launch)))
        ls = [s.length for s in self.samples]
        if any(b < a for a, b in zip(ls, ls[1:])):
            raise ValueError("sample lengths must be non-decreasing")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([s.length for s in self.samples], dtype=float)

    @property
    def contacts(self) -> np.ndarray:
        return np.array([s.contact for s in self.samples], dtype=bool)

    @property
    def angles(self) -> np.ndarray:
        """Contact angles with NaN where there is no contact."""
        return np.array([s.theta_c if s.contact else math.nan for s in self.samples], dtype=float)

    @classmethod
    def from_arrays(cls, lengths, angles, launch, launch_angle, turn=None) -> "SensorStream":
        samples = [
            SensorSample(float(l), False) if math.isnan(a) else SensorSample(float(l), True, float(a))
            for l, a in zip(lengths, angles)
        ]
        return cls(tuple(samples), launch, launch_angle, turn)

    def with_angles(self, angles) -> "SensorStream":
        return SensorStream.from_arrays(self.lengths, angles, self.launch, self.launch_angle, self.turn)


@dataclass(frozen=True)
class Reconstruction:
    wall_points: tuple[tuple[Point2, float], ...]  # (contact point, wall angle in [0, pi))
    pivots: tuple[Point2, ...]
    shape: RobotShape
    swept: tuple[Polygon, ...]
    tips: np.ndarray = field(repr=False)  # estimated tip per sample
    walls: tuple[tuple[int, int, float], ...] = ()  # (first sample, last sample, wall angle) per wall run
    skipped: tuple[str, ...] = ()


# -- closed-form pieces ------------------------------------------------------------


def _dir(a: float) -> np.ndarray:
    return np.array([math.cos(a), math.sin(a)])


def first_contact_point(B, theta_b: float, length: float) -> Point2:
    """Tip of a straight body of `length` leaving B at angle theta_b."""
    if not length > 0:
        raise ValueError("length must be positive")
    return Point2(B[0] + length * math.cos(theta_b), B[1] + length * math.sin(theta_b))


def sliding_contact_point(B, theta_b: float, theta_c0: float, theta_ci: float, length_i: float) -> Point2:
    """Tip while sliding about B: the heading turns by the change in contact angle."""
    h = theta_b + theta_c0 - theta_ci
    return Point2(B[0] + length_i * math.cos(h), B[1] + length_i * math.sin(h))


def pivot_offset(length_i: float, length_o: float, theta_ci: float, theta_co: float, eps: float = 1e-9) -> float:
    """Distance from a new pivot to the tip at the moment the pivot formed.

    The perpendicular distance from the new pivot to the (flat) wall is the
    same at both samples: (delta + L_i - L_o) sin(theta_Ci) = delta sin(theta_Co).
    """
    den = math.sin(theta_co) - math.sin(theta_ci)
    if abs(den) < eps:
        raise IllConditionedPivotError("contact angle barely changed since the pivot formed")
    return (length_i - length_o) * math.sin(theta_ci) / den


def new_pivot_location(B, theta_b: float, length: float, delta: float) -> Point2:
    """Pivot `delta` back from the tip along the body leaving B at theta_b."""
    return Point2(B[0] + (length - delta) * math.cos(theta_b), B[1] + (length - delta) * math.sin(theta_b))


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    xm = x - x.mean()
    d = float(xm @ xm)
    return 0.0 if d <= 0 else float(xm @ (y - y.mean())) / d


def detect_pivot_change(lengths, angles, threshold: float = math.radians(5.0) / 0.01, window: int = 10) -> int | None:
    """Index of the sharpest change in d(theta_C)/dL, or None.

    Slopes are least-squares fits over `window` samples on each side of a
    candidate index (sharing it); `threshold` is in rad/m.
    """
    L = np.asarray(lengths, dtype=float)
    th = np.asarray(angles, dtype=float)
    n = len(L)
    if n < 3:
        return None
    w = max(2, min(window, (n + 1) // 2))
    best, best_i = 0.0, None
    for i in range(w - 1, n - w + 1):
        left = slice(i - w + 1, i + 1)
        right = slice(i, i + w)
        jump = abs(_slope(L[right], th[right]) - _slope(L[left], th[left]))
        if jump > best:
            best, best_i = jump, i
    return best_i if best > threshold else None


def turn_first_contact(B, theta_b: float, l_b: float, l_a: float, theta_t: float) -> Point2:
    """Tip of a turned body: l_b along theta_b, then l_a along theta_b + theta_t."""
    return Point2(
        B[0] + l_b * math.cos(theta_b) + l_a * math.cos(theta_b + theta_t),
        B[1] + l_b * math.sin(theta_b) + l_a * math.sin(theta_b + theta_t),
    )


def wall_angle(theta_c: float, theta_t: float, theta_b: float) -> float:
    """Wall direction in [0, pi)."""
    return (theta_c + theta_t + theta_b) % math.pi


def reconstruct_pat_pivot(B, theta_b: float, l_b: float) -> Point2:
    """The turn point, which becomes the pivot in the pivot-at-turn case."""
    return Point2(B[0] + l_b * math.cos(theta_b), B[1] + l_b * math.sin(theta_b))


def reconstruct_pivot_contact(B, l_b: float, l_a_i: float, theta_w: float, theta_t: float, theta_ci: float) -> Point2:
    """Tip of a turned body rotating rigidly about B with its tip on the wall."""
    h = theta_w - theta_ci
    hb = h - theta_t
    return Point2(B[0] + l_b * math.cos(hb) + l_a_i * math.cos(h), B[1] + l_b * math.sin(hb) + l_a_i * math.sin(h))


def fl_quadratic(B, l_b: float, contact, theta_w: float, theta_ci: float) -> tuple[float, float, float]:
    """Coefficients (a, b, c) of the quadratic in T'_x for a locked tip.

    T' lies on the circle of radius l_b about B and on the line through the
    contact with slope tan(theta_W - theta_Ci).
    """
    t = math.tan(theta_w - theta_ci)
    k = contact[1] - contact[0] * t
    a = 1.0 + t * t
    b = 2.0 * t * (k - B[1]) - 2.0 * B[0]
    c = B[0] ** 2 - l_b**2 + (B[1] - k) ** 2
    return a, b, c


def track_fl_turn_point(B, l_b: float, contact, theta_w: float, theta_ci: float, near=None, l_a_min: float = 0.0):
    """Turn point of a friction-locked robot, or None when the line misses the circle.

    Of the two intersections the one nearest `near` (the previous turn
    point) is kept, subject to the distal segment being longer than
    `l_a_min`. Solved along the line so vertical headings need no care.
    """
    near = contact if near is None else near
    return friction_lock_turn_point(B, l_b, contact, theta_w - theta_ci, l_a_min, near)


def _centered_mean(x: np.ndarray, window: int) -> np.ndarray:
    """Moving average whose window shrinks symmetrically near the ends."""
    m = len(x)
    c = np.concatenate([[0.0], np.cumsum(x)])
    i = np.arange(m)
    half = np.minimum(window // 2, np.minimum(i, m - 1 - i))
    return (c[i + half + 1] - c[i - half]) / (2 * half + 1)


def lowpass_filter(stream: SensorStream, window: int = 5, breaks=()) -> SensorStream:
    """Zero-phase moving average of the contact angle within each contact run.

    Lengths are untouched. The window shrinks symmetrically at run ends, so
    constant and linear runs pass unchanged. `breaks` lists sample indices
    that start a new run even when the previous sample was in contact.
    """
    if window <= 1 or len(stream) == 0:
        return stream
    th = stream.angles
    out = th.copy()
    for a, b in _runs(~np.isnan(th), breaks):
        out[a:b] = _centered_mean(th[a:b], window)
    return stream.with_angles(out)


def _runs(mask: np.ndarray, breaks=()) -> list[tuple[int, int]]:
    """Half-open index ranges of consecutive True values, split at `breaks`."""
    cuts = set(int(b) for b in breaks)
    out = []
    start = None
    for i, m in enumerate(mask):
        if m and start is not None and i in cuts:
            out.append((start, i))
            start = i
        elif m and start is None:
            start = i
        elif not m and start is not None:
            out.append((start, i))
            start = None
    if start is not None:
        out.append((start, len(mask)))
    return out


# -- synthetic streams -------------------------------------------------------------


def _bracket_root(f, target: float, n: int = 256) -> float:
    """Smallest u in [0, 1] with f(u) >= target, assuming f rises from f(0)."""
    us = np.linspace(0.0, 1.0, n + 1)
    prev = 0.0
    for u in us[1:]:
        if f(u) >= target:
            lo, hi = prev, u
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if f(mid) >= target:
                    hi = mid
                else:
                    lo = mid
            return 0.5 * (lo + hi)
        prev = u
    return 1.0


def _phase_heading(phase, L: float) -> float:
    """Tip heading for a contact phase at total length L."""
    ell = L - phase.anchor_length
    x0, x1 = np.array(phase.tip0), np.array(phase.tip1)
    if phase.kind == "slide":
        P = np.array(phase.anchor)
        d = x1 - x0
        w = x0 - P
        a, b, c = d @ d, 2 * (d @ w), w @ w - ell * ell
        disc = max(0.0, b * b - 4 * a * c)
        t = min(1.0, max(0.0, (-b + math.sqrt(disc)) / (2 * a))) if a > 0 else 0.0
        q = x0 + t * d
        return math.atan2(q[1] - P[1], q[0] - P[0])
    if phase.kind == "chain":
        target = ell - phase.l_b

        def la(u):
            p = chain_pose(phase.anchor, phase.l_b, phase.bend, x0 + u * (x1 - x0))
            return -math.inf if p is None else p[2]

        u = _bracket_root(la, target)
        theta_b, _, _ = chain_pose(phase.anchor, phase.l_b, phase.bend, x0 + u * (x1 - x0))
        return theta_b + phase.bend
    if phase.kind == "lock":
        B = np.array(phase.anchor)
        a0 = math.atan2(phase.turn0[1] - B[1], phase.turn0[0] - B[0])
        a1 = math.atan2(phase.turn1[1] - B[1], phase.turn1[0] - B[0])
        da = math.remainder(a1 - a0, 2 * math.pi)
        target = ell - phase.l_b

        def turn(u):
            return B + phase.l_b * _dir(a0 + u * da)

        u = _bracket_root(lambda u: float(np.linalg.norm(x0 - turn(u))), target)
        T = turn(u)
        return math.atan2(x0[1] - T[1], x0[0] - T[0])
    raise ValueError(f"no contact angle for phase {phase.kind!r}")


def synthesize_stream(env: Environment, result: DeploymentResult, spacing: float = 0.002) -> SensorStream:
    """Noiseless stream a tip sensor would record during `result`.

    Samples every `spacing` metres of growth plus the final length. Hugging
    the wall with the body parallel to it reads as no contact.
    """
    obs = env.obstacle_set
    lp = env.launch(result.action.launch_point_id)
    a = result.action
    turn = None if not a.is_turning else (a.turn_length, math.radians(a.turn_angle))
    total = result.length
    Ls = list(np.arange(spacing, total, spacing))
    if total > 0 and (not Ls or total - Ls[-1] > 1e-12):
        Ls.append(total)
    samples = []
    phases = [p for p in result.phases if p.end > p.start]
    j = 0
    for L in Ls:
        while j < len(phases) - 1 and L > phases[j].end + 1e-12:
            j += 1
        ph = phases[j] if phases else None
        if ph is None or ph.kind in ("free", "hug") or not (ph.start - 1e-12 <= L <= ph.end + 1e-12):
            samples.append(SensorSample(float(L), False))
            continue
        h = _phase_heading(ph, min(L, ph.end))
        tw = math.atan2(obs.ey[ph.wall], obs.ex[ph.wall])
        tc = (tw - h) % math.pi
        if not (0.0 < tc < math.pi):
            samples.append(SensorSample(float(L), False))
            continue
        samples.append(SensorSample(float(L), True, float(tc)))
    return SensorStream(tuple(samples), lp.position, math.radians(a.launch_angle), turn)


def add_noise(stream: SensorStream, rng: np.random.Generator, sigma_theta: float, sigma_length: float = 0.0) -> SensorStream:
    """Gaussian noise on angles (rad) and lengths (m); lengths stay non-decreasing."""
    L = stream.lengths + rng.normal(0.0, sigma_length, len(stream)) if sigma_length > 0 else stream.lengths
    L = np.maximum.accumulate(np.maximum(L, 0.0))
    th = stream.angles
    th = th + rng.normal(0.0, sigma_theta, len(th))
    th = np.where(np.isnan(th), np.nan, np.clip(th, 1e-6, math.pi - 1e-6))
    return SensorStream.from_arrays(L, th, stream.launch, stream.launch_angle, stream.turn)


# -- contact regimes ---------------------------------------------------------------


class _Wall:
    """Wall line through `point`; `angle` is unwrapped so heading = angle - theta_C."""

    def __init__(self, point, angle: float):
        self.point = np.asarray(point, dtype=float)
        self.angle = float(angle)
        self.n = np.array([-math.sin(angle), math.cos(angle)])

    def offset(self, p) -> float:
        return float(self.n @ (np.asarray(p, dtype=float) - self.point))


class _Straight:
    kind = "straight"

    def __init__(self, P, L_P: float):
        self.P = np.asarray(P, dtype=float)
        self.L_P = float(L_P)

    def pose(self, wall: _Wall, tc: float):
        """(length, tip, turn point) with the tip on the wall at contact angle tc."""
        u = _dir(wall.angle - tc)
        den = float(wall.n @ u)
        if abs(den) < 1e-12:
            return None
        ell = -wall.offset(self.P) / den
        if ell <= 0:
            return None
        return self.L_P + ell, self.P + ell * u, None

    def point(self, wall: _Wall, L: float, tc: float) -> np.ndarray:
        return self.P + (L - self.L_P) * _dir(wall.angle - tc)

    def accept(self, pose):
        pass


class _Chain:
    kind = "chain"

    def __init__(self, B, L_B: float, l_b: float, bend: float):
        self.B = np.asarray(B, dtype=float)
        self.L_B = float(L_B)
        self.l_b = float(l_b)
        self.bend = float(bend)

    def pose(self, wall: _Wall, tc: float):
        h = wall.angle - tc
        T = self.B + self.l_b * _dir(h - self.bend)
        u = _dir(h)
        den = float(wall.n @ u)
        if abs(den) < 1e-12:
            return None
        ell = -wall.offset(T) / den
        if ell <= 0:
            return None
        return self.L_B + self.l_b + ell, T + ell * u, T

    def point(self, wall: _Wall, L: float, tc: float) -> np.ndarray:
        return np.array(reconstruct_pivot_contact(self.B, self.l_b, L - self.L_B - self.l_b, wall.angle, self.bend, tc))

    def accept(self, pose):
        pass


class _Lock:
    kind = "lock"

    def __init__(self, B, L_B: float, l_b: float, C, T):
        self.B = np.asarray(B, dtype=float)
        self.L_B = float(L_B)
        self.l_b = float(l_b)
        self.C = np.asarray(C, dtype=float)
        self.T = np.asarray(T, dtype=float)
        self.hint = None  # last length queried, picks the turn-point branch

    def pose(self, wall: _Wall, tc: float):
        h = wall.angle - tc
        u = _dir(h)
        w = self.C - self.B
        uw = float(u @ w)
        disc = uw * uw - float(w @ w) + self.l_b**2
        if disc < 0:
            return None
        cands = [s for s in (uw - math.sqrt(disc), uw + math.sqrt(disc)) if s > 0]
        if not cands:
            return None
        if self.hint is not None:
            s = min(cands, key=lambda s: abs(self.L_B + self.l_b + s - self.hint))
        else:
            s = min(cands, key=lambda s: float(np.linalg.norm(self.C - s * u - self.T)))
        return self.L_B + self.l_b + s, self.C.copy(), self.C - s * u

    def theta_for_length(self, wall: _Wall, L: float, tc0: float) -> float | None:
        # the turn point moves on a circle about the base, so length fixes it directly
        d = float(np.linalg.norm(self.C - self.B))
        r = L - self.L_B - self.l_b
        if d <= 0 or r <= 0 or d > r + self.l_b + 1e-12 or d < abs(r - self.l_b) - 1e-12:
            return None
        e = (self.C - self.B) / d
        a = (self.l_b**2 - r * r + d * d) / (2 * d)
        hh = math.sqrt(max(0.0, self.l_b**2 - a * a))
        nrm = np.array([-e[1], e[0]])
        T = min((self.B + a * e + hh * nrm, self.B + a * e - hh * nrm), key=lambda t: float(np.linalg.norm(t - self.T)))
        self.hint = L
        hd = math.atan2(self.C[1] - T[1], self.C[0] - T[0])
        return tc0 + math.remainder(wall.angle - hd - tc0, 2 * math.pi)

    def point(self, wall: _Wall, L: float, tc: float) -> np.ndarray:
        return self.C.copy()

    def accept(self, pose):
        self.T = pose[2]


def _theta_at(model, wall: _Wall, L: float, tc0: float) -> float | None:
    """Contact angle at which `model` has total length L (Newton from tc0)."""
    if isinstance(model, _Lock):
        return model.theta_for_length(wall, L, tc0)
    tc = tc0
    for _ in range(30):
        p = model.pose(wall, tc)
        if p is None:
            return None
        f = p[0] - L
        if abs(f) < 1e-13:
            return tc
        hstep = 1e-7 if tc < math.pi - 1e-6 else -1e-7
        q = model.pose(wall, tc + hstep)
        if q is None:
            return None
        der = (q[0] - p[0]) / hstep
        if der == 0 or not math.isfinite(der):
            return None
        step = max(-0.05, min(0.05, f / der))
        tc = min(math.pi - 1e-9, max(1e-9, tc - step))
    return tc if abs(f) < 1e-9 else None


def _residuals(model, wall: _Wall, L: np.ndarray, th: np.ndarray) -> np.ndarray:
    out = np.empty(len(L))
    for i, (l, t) in enumerate(zip(L, th)):
        m = _theta_at(model, wall, float(l), float(t))
        out[i] = 1.0 if m is None else t - m
    return out


# -- reconstruction ----------------------------------------------------------------


@dataclass
class _State:
    P: np.ndarray
    L_P: float
    heading: float
    pending: tuple[float, float] | None
    turned: bool = False
    B: np.ndarray | None = None
    L_B: float = 0.0
    l_b: float = 0.0
    bend: float = 0.0
    T: np.ndarray | None = None

    def anchor(self):
        if self.turned:
            return self.T, self.L_B + self.l_b
        return self.P, self.L_P

    def free_tip(self, L: float) -> np.ndarray:
        a, la = self.anchor()
        return a + (L - la) * _dir(self.heading)


class _Reconstructor:
    def __init__(self, stream, mu, radius, window, noise, jump_tol, exclude):
        self.stream = stream
        self.mu, self.radius = mu, radius
        self.L = stream.lengths
        raw = stream.angles
        contact = ~np.isnan(raw)
        # bridge one-sample dropouts inside contact
        for i in range(1, len(raw) - 1):
            if not contact[i] and contact[i - 1] and contact[i + 1]:
                raw[i] = 0.5 * (raw[i - 1] + raw[i + 1])
                contact[i] = True
        episodes = _runs(contact)
        for e in exclude:
            if 0 <= e < len(episodes):
                a, b = episodes[e]
                raw[a:b] = math.nan
                contact[a:b] = False
        jt = max(jump_tol, 5.0 * noise)
        breaks = [i for i in range(1, len(raw)) if contact[i] and contact[i - 1] and abs(raw[i] - raw[i - 1]) > jt]
        self.runs = _runs(contact, breaks)
        self.th = lowpass_filter(stream.with_angles(raw), window, breaks).angles if window > 1 else raw
        eff = noise / math.sqrt(max(window, 1))
        self.tol = max(1e-6, 4.0 * eff)
        self.fit_tol = max(1e-4, 3.0 * eff)
        self.persist = 1 if noise == 0 else 3
        self.W = 10 if noise == 0 else 25
        self.lock_n = 2 if noise == 0 else 5
        turn = stream.turn if stream.turn is not None and stream.turn[1] != 0 else None
        self.st = _State(np.array(stream.launch, dtype=float), 0.0, stream.launch_angle, turn)
        self.vertices: list[tuple[np.ndarray, str]] = [(np.array(stream.launch, dtype=float), "launch")]
        self.tips = np.full((len(self.L), 2), np.nan)
        self.wall_points: list[tuple[Point2, float]] = []
        self.walls: list[tuple[int, int, float]] = []
        self.swept: list[Polygon] = []
        self.skipped: list[str] = []

    # -- helpers -----------------------------------------------------------------------

    def _sweep(self, *pts):
        try:
            poly = Polygon([tuple(map(float, p)) for p in pts])
        except GeometryError:
            return
        if poly.area > 1e-12:
            self.swept.append(poly)

    def _free_to(self, L: float):
        """Advance free growth to L, forming a pending turn on the way."""
        st = self.st
        if st.pending is not None and L >= st.pending[0]:
            lt, tt = st.pending
            st.pending = None
            T = st.free_tip(lt)
            st.turned, st.B, st.L_B, st.l_b, st.bend, st.T = True, st.P.copy(), st.L_P, lt - st.L_P, tt, T
            st.heading += tt
        return st.free_tip(L)

    def _model_from_state(self, tc: float, L: float):
        """Regime entered on first contact; "freeze" means pivot at the turn."""
        st = self.st
        if not st.turned:
            return _Straight(st.P, st.L_P)
        l_a = L - st.L_B - st.l_b
        m, _, _ = classify_turned_contact(tc % math.pi, st.bend, l_a, st.l_b, self.mu, self.radius)
        if m is Morphology.PIVOT_AT_TURN:
            return "freeze"
        if m is Morphology.FRICTION_LOCKED:
            return _Lock(st.B, st.L_B, st.l_b, st.T + l_a * _dir(st.heading), st.T)
        return _Chain(st.B, st.L_B, st.l_b, st.bend)

    def _freeze(self, T):
        st = self.st
        self.vertices.append((np.array(T, dtype=float), "turn"))
        st.P, st.L_P = np.array(T, dtype=float), st.L_B + st.l_b
        st.turned = False
        st.T = None

    def _add_pivot(self, p, L_p: float):
        self.vertices.append((np.array(p, dtype=float), "pivot"))

    def _init_wall(self, j: int, b: int, h_c: float, L_c: float, L_lo: float, tip_at):
        """Wall met at sample j; the contact happened at length L_c in [L_lo, L_j].

        tip_at(L) is the tip position before contact. Straight and chain
        regimes are symmetric under rotation about their base, so L_c stays
        at its estimate and only the wall angle is solved; a locked tip also
        pins L_c, which is fitted from the first samples.
        """
        tc = float(self.th[j])
        th_w = h_c + tc
        freeze = False
        m = None
        for _ in range(4):
            m = self._model_from_state(th_w - h_c, L_c)
            freeze = m == "freeze"
            if freeze:
                m = _Straight(self.st.T, self.st.L_B + self.st.l_b)
            if isinstance(m, _Lock):
                th_new, L_c = self._fit_lock_start(m, j, b, L_lo, L_c, th_w, tip_at)
                m.C = np.asarray(tip_at(L_c), dtype=float)
            else:
                th_new = self._solve_wall_angle(m, tip_at(L_c), tc, float(self.L[j]), th_w)
            done = abs(th_new - th_w) < 1e-12
            th_w = th_new
            if done:
                break
        if freeze:
            self._freeze(self.st.T)
        return _Wall(tip_at(L_c), th_w), m

    def _fit_lock_start(self, m, j, b, L_lo, L_c, th_w, tip_at):
        n = min(b - j, self.lock_n)
        Ls, ths = self.L[j : j + n], self.th[j : j + n]

        def build(x):
            C = np.asarray(tip_at(x[0]), dtype=float)
            return _Lock(m.B, m.L_B, m.l_b, C, m.T), _Wall(C, x[1])

        def res(x):
            lk, w = build(x)
            return _residuals(lk, w, Ls, ths)

        L_hi = float(self.L[j])
        if n < 2 or L_hi - L_lo <= 1e-12:
            x0, lo, hi = [th_w], [th_w - 0.3], [th_w + 0.3]
            f = lambda x: res([L_c, x[0]])
        else:
            x0, lo, hi = [L_c, th_w], [L_lo, th_w - 0.3], [L_hi, th_w + 0.3]
            f = res
        try:
            sol = least_squares(f, x0, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        except ValueError:
            return th_w, L_c
        if len(sol.x) == 1:
            return float(sol.x[0]), L_c
        return float(sol.x[1]), float(sol.x[0])

    def _solve_wall_angle(self, model, C_c, tc, L, guess) -> float:
        """Wall angle for which `model` reads tc at length L."""

        def f(a):
            p = model.pose(_Wall(C_c, a), tc)
            return math.nan if p is None else p[0] - L

        f0 = f(guess)
        if not math.isfinite(f0) or abs(f0) < 1e-13:
            return guess
        for k in range(1, 41):
            for sgn in (1, -1):
                a = guess + sgn * 0.005 * k
                fa = f(a)
                if math.isfinite(fa) and fa * f0 <= 0:
                    lo, hi = sorted((guess, a))
                    try:
                        return brentq(f, lo, hi, xtol=1e-14)
                    except ValueError:
                        return guess
        return guess

    # -- regime changes --------------------------------------------------------------

    def _hypotheses(self, model, wall: _Wall, tc_prev: float, L_prev: float, Lw: np.ndarray, thw: np.ndarray):
        """Candidate successor regimes after a break, fitted to the window samples."""
        out = []
        base = model.pose(wall, tc_prev)
        if base is None:
            return out
        ell_prev = base[0]
        lo_t, hi_t = tc_prev - 0.3, tc_prev + 0.3
        lo_t, hi_t = max(1e-6, lo_t), min(math.pi - 1e-6, hi_t)

        def fit(build, x0, lo, hi):
            def res(x):
                m = build(x)
                return np.full(len(Lw), 1.0) if m is None else _residuals(m[0], wall, Lw, thw)

            x0 = np.clip(x0, np.array(lo) + 1e-12, np.array(hi) - 1e-12)
            try:
                sol = least_squares(res, x0, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
            except ValueError:
                return
            r = res(sol.x)
            m = build(sol.x)
            if m is not None:
                out.append((float(np.sqrt(np.mean(r * r))), m))

        if isinstance(model, _Straight):
            ell = ell_prev - model.L_P

            def wrap(x):
                tcw, s = x
                h = wall.angle - tcw
                Pn = model.P + s * _dir(h)
                return _Straight(Pn, model.L_P + s), [("pivot", Pn)]

            for s0 in self._csc_guesses(Lw, thw, model.L_P, ell):
                fit(wrap, [tc_prev, s0], [lo_t, 0.0], [hi_t, ell])
        elif isinstance(model, _Chain):
            ell = ell_prev - model.L_B - model.l_b

            def la(x):
                tcw, s = x
                h = wall.angle - tcw
                T = model.B + model.l_b * _dir(h - model.bend)
                Pn = T + s * _dir(h)
                piv = [("turn", T)] + ([("pivot", Pn)] if s > 1e-6 else [])
                return _Straight(Pn, model.L_B + model.l_b + s), piv

            def lb(x):
                tcw, s = x
                h = wall.angle - tcw
                Bn = model.B + s * _dir(h - model.bend)
                return _Chain(Bn, model.L_B + s, model.l_b - s, model.bend), [("base", Bn)]

            for s0 in self._csc_guesses(Lw, thw, model.L_B + model.l_b, ell):
                fit(la, [tc_prev, s0], [lo_t, 0.0], [hi_t, max(ell, 1e-9)])
            for frac in (0.25, 0.5, 0.75):
                fit(lb, [tc_prev, frac * model.l_b], [lo_t, 0.0], [hi_t, model.l_b * (1 - 1e-9)])
        elif isinstance(model, _Lock):

            def turn_at(tcw):
                p = model.pose(wall, tcw)
                return None if p is None else p[2]

            def pat(x):
                T = turn_at(x[0])
                return None if T is None else (_Straight(T, model.L_B + model.l_b), [("turn", T)])

            def np_(x):
                T = turn_at(x[0])
                if T is None:
                    return None
                a, b = T - model.B, model.C - T
                bend = math.atan2(a[0] * b[1] - a[1] * b[0], a @ b)
                return _Chain(model.B, model.L_B, model.l_b, bend), [("moved", T)]

            fit(pat, [tc_prev], [lo_t], [hi_t])
            fit(np_, [tc_prev], [lo_t], [hi_t])
        return out

    @staticmethod
    def _csc_guesses(Lw, thw, L_base, ell):
        """Starting offsets of a new pivot from a line fit of 1/sin(theta_C) against L."""
        guesses = [0.5 * ell]
        if len(Lw) >= 2:
            y = 1.0 / np.sin(thw)
            a = _slope(Lw, y)
            if a != 0:
                b = y.mean() - a * Lw.mean()
                s = -b / a - L_base
                if 0 < s < ell:
                    guesses.insert(0, s)
        return guesses

    def _apply(self, model, pivots):
        for kind, p in pivots:
            if kind == "pivot":
                self._add_pivot(p, 0.0)
            elif kind == "turn":
                self._freeze(p)
            elif kind == "base":
                self.st.B = np.array(p, dtype=float)
                self.vertices.append((np.array(p, dtype=float), "pivot"))
            elif kind == "moved":
                self.st.T = np.array(p, dtype=float)
        st = self.st
        if isinstance(model, _Straight):
            st.P, st.L_P = model.P.copy(), model.L_P
        elif isinstance(model, _Chain):
            st.B, st.L_B, st.l_b, st.bend = model.B.copy(), model.L_B, model.l_b, model.bend

    # -- main loop ---------------------------------------------------------------------

    def run(self) -> Reconstruction:
        L = self.L
        n = len(L)
        run_at = {a: b for a, b in self.runs}
        i = 0
        prev_contact = False
        while i < n:
            if i in run_at:
                i = self._contact_run(i, run_at[i], prev_contact)
                prev_contact = True
                continue
            self.tips[i] = self._free_to(L[i])
            prev_contact = False
            i += 1
        return self._result()

    def _contact_run(self, a: int, b: int, after_contact: bool) -> int:
        st = self.st
        L, th = self.L, self.th
        if after_contact and a > 0 and np.all(np.isfinite(self.tips[a - 1])):
            # a wall change inside one episode: the new wall starts where the old one left off
            C_prev, L_c = self.tips[a - 1].copy(), float(L[a - 1])
            L_lo = L_c
            tip_at = lambda _l: C_prev
        else:
            L_lo = float(L[a - 1]) if a > 0 else float(L[a])
            L_c = 0.5 * (L_lo + L[a])
            self._free_to(L_c)
            tip_at = self.st.free_tip
        wall, model = self._init_wall(a, b, st.heading, L_c, L_lo, tip_at)
        start = a
        prev = None  # (tc, L, pose)
        i = a
        bad = 0
        while i < b:
            if st.pending is not None and L[i] >= st.pending[0]:
                return self._turn_in_contact(wall, model, prev, i, start)
            tc = float(th[i])
            m = _theta_at(model, wall, float(L[i]), tc)
            r = math.inf if m is None else tc - m
            if abs(r) <= self.tol:
                bad = 0
                pose = model.pose(wall, m)
                self._accept(model, wall, i, tc, pose, prev)
                prev = (tc, float(L[i]), pose)
                i += 1
                continue
            bad += 1
            if bad < self.persist and i + 1 < b:
                i += 1
                continue
            k = i - bad + 1
            win = slice(k, min(b, k + self.W))
            if win.stop - win.start < 2:
                self.skipped.append(f"samples {k}-{b - 1}: too few samples after a regime change")
                break
            tc_prev = prev[0] if prev is not None else float(th[k])
            L_prev = prev[1] if prev is not None else float(L[k])
            hyps = self._hypotheses(model, wall, tc_prev, L_prev, L[win], th[win])
            if not hyps:
                self.skipped.append(f"samples {k}-{b - 1}: no successor regime")
                break
            rms, (new_model, pivots) = min(hyps, key=lambda h: h[0])
            if rms > self.fit_tol:
                self.skipped.append(f"samples {k}-{b - 1}: unclassified regime change (rms {rms:.2e} rad)")
                break
            self._apply(new_model, pivots)
            model = new_model
            bad = 0
            i = k
        self.walls.append((start, b - 1, wall.angle % math.pi))
        self._leave(model, wall, prev)
        for j in range(i, b):
            self.tips[j] = np.nan
        return b

    def _accept(self, model, wall, i, tc, pose, prev):
        L = float(self.L[i])
        C = model.point(wall, L, tc)
        self.tips[i] = C
        self.wall_points.append((Point2(float(C[0]), float(C[1])), wall.angle % math.pi))
        model.accept(pose)
        if prev is not None and prev[2] is not None:
            _, _, p0 = prev
            if isinstance(model, _Straight):
                self._sweep(model.P, p0[1], pose[1])
            elif isinstance(model, _Chain) and p0[2] is not None:
                self._sweep(model.B, p0[2], pose[2])
                self._sweep(p0[2], p0[1], pose[1])
                self._sweep(p0[2], pose[1], pose[2])
            elif isinstance(model, _Lock) and p0[2] is not None:
                self._sweep(model.B, p0[2], pose[2])
                self._sweep(p0[2], model.C, pose[2])

    def _leave(self, model, wall, prev):
        """Contact ends: free growth continues from the last pose."""
        st = self.st
        if prev is None:
            return
        tc, _, pose = prev
        st.heading = wall.angle - tc
        if isinstance(model, _Straight):
            st.P, st.L_P = model.P.copy(), model.L_P
        elif isinstance(model, (_Chain, _Lock)):
            st.T = np.array(pose[2])
            if isinstance(model, _Lock):
                a, b = st.T - st.B, model.C - st.T
                st.bend = math.atan2(a[0] * b[1] - a[1] * b[0], a @ b)

    def _turn_in_contact(self, wall, model, prev, i, start) -> int:
        """The pending turn forms while the tip slides along the wall."""
        st = self.st
        lt, tt = st.pending
        st.pending = None
        tc_prev = prev[0] if prev is not None else float(self.th[i])
        tcT = _theta_at(model, wall, lt, tc_prev)
        tcT = tc_prev if tcT is None else tcT
        pose = model.pose(wall, tcT)
        T = pose[1] if pose is not None else st.free_tip(lt)
        h = wall.angle - tcT
        self.walls.append((start, i - 1, wall.angle % math.pi))
        if isinstance(model, _Straight):
            st.P, st.L_P = model.P.copy(), model.L_P
        side = wall.offset(st.P)
        n_obs = -wall.n if side > 0 else wall.n
        h2 = h + tt
        if float(_dir(h2) @ n_obs) < -1e-6:
            st.turned, st.B, st.L_B, st.l_b, st.bend, st.T = True, st.P.copy(), st.L_P, lt - st.L_P, tt, np.array(T)
            st.heading = h2
        else:
            # the turned tip would press into the wall: the body runs along it
            self.vertices.append((np.array(T), "turn"))
            st.P, st.L_P = np.array(T), lt
            u = _dir(wall.angle)
            st.heading = wall.angle if float(u @ _dir(h)) >= 0 else wall.angle + math.pi
        return i

    def _result(self) -> Reconstruction:
        st = self.st
        verts = list(self.vertices)
        if st.turned:
            verts.append((st.T, "turn"))
        last = None
        for t in self.tips[::-1]:
            if np.all(np.isfinite(t)):
                last = t
                break
        if last is None:
            last = st.free_tip(float(self.L[-1])) if len(self.L) else verts[0][0]
        verts.append((last, "tip"))
        shape = []
        for p, kind in verts:
            q = Point2(float(p[0]), float(p[1]))
            if shape and math.dist(q, shape[-1].point) <= EPS_GEO and kind != "tip":
                continue
            shape.append(ShapeVertex(q, kind))
        pivots = tuple(v.point for v in shape[1:-1])
        return Reconstruction(
            wall_points=tuple(self.wall_points),
            pivots=pivots,
            shape=RobotShape(tuple(shape)),
            swept=tuple(self.swept),
            tips=self.tips,
            walls=tuple(self.walls),
            skipped=tuple(self.skipped),
        )


def reconstruct(
    stream: SensorStream,
    mu: float = DEFAULT_MU,
    radius: float = DEFAULT_RADIUS,
    window: int | None = None,
    noise: float = 0.0,
    jump_tol: float = math.radians(2.0),
    exclude_episodes=(),
) -> Reconstruction:
    """Estimate walls, pivots, shape and swept area from a sensor stream.

    `noise` is the expected angle noise (rad) before filtering; it scales
    the regime-change thresholds. The angle filter `window` defaults to 5
    samples for noisy streams and to no filtering when noise is 0. Contact
    angle jumps above `jump_tol` start a new wall. Episodes listed in `exclude_episodes` (by order of
    appearance) are treated as false contacts.
    """
    if len(stream) == 0:
        p = Point2(*stream.launch)
        return Reconstruction((), (), RobotShape((ShapeVertex(p, "launch"), ShapeVertex(p, "tip"))), (), np.zeros((0, 2)))
    if window is None:
        window = 5 if noise > 0 else 1
    rec = _Reconstructor(stream, mu, radius, window, noise, jump_tol, exclude_episodes).run()
    for msg in rec.skipped:
        log.info("reconstruct: %s", msg)
    return rec
