"""Closed-form contact mechanics for straight and single-turn vine robots.

Contact angles are measured counter-clockwise from the tip heading to the
wall tangent and lie in (0, pi). Turned robots are described in the frame
where the turn angle is non-negative; `mirror_contact` maps a negative turn
into that frame.

The boundary functions accept numpy arrays as well as floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

DEFAULT_MU = 0.3


class FrictionConeError(ValueError):
    """No static normal-force solution exists for the requested sense."""


class ClassificationDegenerateError(ValueError):
    """Morphology boundaries are out of order for this geometry."""


@dataclass(frozen=True)
class TubeParams:
    pressure: float  # Pa
    radius: float  # m
    wall_thickness: float  # m
    elastic_modulus: float  # Pa
    shear_modulus: float  # Pa

    def __post_init__(self):
        for name in ("pressure", "radius", "wall_thickness", "elastic_modulus", "shear_modulus"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ContactGeometry:
    theta_c: float
    theta_t: float
    l_a: float
    l_b: float
    mu: float = DEFAULT_MU
    radius: float = 0.0323

    def __post_init__(self):
        if not (0.0 < self.theta_c < math.pi):
            raise ValueError("theta_c must lie in (0, pi)")
        if self.theta_t < 0:
            raise ValueError("theta_t must be non-negative; mirror the scene first")
        if not (self.l_a > 0 and self.l_b > 0):
            raise ValueError("segment lengths must be positive")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")

    @property
    def length_ratio(self) -> float:
        """L_a / L_b."""
        return self.l_a / self.l_b


class Morphology(Enum):
    POSITIVE_PIVOT = "PositivePivot"
    PIVOT_AT_TURN = "PivotAtTurn"
    FRICTION_LOCKED = "FrictionLocked"
    NEGATIVE_PIVOT = "NegativePivot"

    @property
    def short(self) -> str:
        return {"PositivePivot": "PP", "PivotAtTurn": "PaT", "FrictionLocked": "FL", "NegativePivot": "NP"}[
            self.value
        ]


def internal_moment(tube: TubeParams) -> float:
    return math.pi * tube.pressure * tube.radius**3


def buckling_force(tube: TubeParams, length: float) -> float:
    if not length > 0:
        raise ValueError("unsupported length must be positive")
    E, G, t, P, R = tube.elastic_modulus, tube.shear_modulus, tube.wall_thickness, tube.pressure, tube.radius
    num = (E * math.pi * R**4 * t * P + E * G * math.pi * R**3 * t**2) * math.pi**2
    den = E * math.pi**2 * R**2 * t + R * length**2 * P + G * t * length**2
    return num / den


def straight_critical_angle(slenderness, mu):
    """Contact angle below which a straight robot pivots instead of buckling."""
    s = np.asarray(slenderness, dtype=float)
    out = np.arctan((s - mu) / (mu * s + 1.0))
    return float(out) if out.ndim == 0 else out


def straight_contact_stuck(theta_c: float, slenderness: float, mu: float = DEFAULT_MU) -> bool:
    """True inside the buckling band around perpendicular contact."""
    crit = straight_critical_angle(slenderness, mu)
    return crit < theta_c < math.pi - crit


def boundary_pp_pat(theta_t, mu):
    """PP | PaT boundary, atan(1/mu) - theta_T."""
    # atan2(1, mu) is atan(1/mu) with the mu = 0 limit pi/2 built in
    out = np.arctan2(1.0, np.asarray(mu, dtype=float)) - np.asarray(theta_t, dtype=float)
    return float(out) if out.ndim == 0 else out


def boundary_pp_pat_ratio(theta_t, mu):
    """Same boundary written as a ratio of turn-angle trigonometric terms."""
    theta_t = np.asarray(theta_t, dtype=float)
    out = np.arctan2(np.cos(theta_t) - mu * np.sin(theta_t), np.sin(theta_t) + mu * np.cos(theta_t))
    return float(out) if out.ndim == 0 else out


def pat_fl_angle(theta_t, l_a, l_b, mu, radius):
    """PaT | FL boundary from segment lengths (l_a may be 0 as a limit)."""
    theta_t = np.asarray(theta_t, dtype=float)
    c, s = np.cos(theta_t), np.sin(theta_t)
    num = l_a + l_b * (c - mu * s) - mu * radius
    den = l_b * (s + mu * c) + mu * l_a + radius
    out = np.arctan2(num, den)
    return float(out) if out.ndim == 0 else out


def fl_np_angle(theta_t, l_a, l_b, mu, radius):
    """FL | NP boundary from segment lengths."""
    theta_t = np.asarray(theta_t, dtype=float)
    c, s = np.cos(theta_t), np.sin(theta_t)
    num = l_a + l_b * (c + mu * s) - mu * radius
    den = l_b * (s - mu * c) - mu * l_a - radius
    out = np.arctan2(num, den)
    return float(out) if out.ndim == 0 else out


def boundary_pat_fl(g: ContactGeometry) -> float:
    return pat_fl_angle(g.theta_t, g.l_a, g.l_b, g.mu, g.radius)


def boundary_fl_np(g: ContactGeometry) -> float:
    return fl_np_angle(g.theta_t, g.l_a, g.l_b, g.mu, g.radius)


def morphology_boundaries(g: ContactGeometry) -> tuple[float, float, float]:
    return boundary_pp_pat(g.theta_t, g.mu), boundary_pat_fl(g), boundary_fl_np(g)


def normal_force_magnitude(tube: TubeParams, theta_c: float, mu: float, friction_sense: str) -> float:
    """Tip normal force for friction producing a positive or negative moment."""
    if friction_sense == "positive-moment":
        den = math.sin(theta_c) - mu * math.cos(theta_c)
    elif friction_sense == "negative-moment":
        den = math.sin(theta_c) + mu * math.cos(theta_c)
    else:
        raise ValueError(f"unknown friction sense {friction_sense!r}")
    if den <= 0:
        raise FrictionConeError(f"no static solution at theta_c={math.degrees(theta_c):.3f} deg")
    return tube.pressure * math.pi * tube.radius**2 / den


def classify_angles(theta_c: float, b1: float, b2: float, b3: float) -> Morphology:
    """Branch order of the turning algorithm: PP, then PaT, then FL, else NP."""
    if theta_c <= b1:
        return Morphology.POSITIVE_PIVOT
    if theta_c <= b2:
        return Morphology.PIVOT_AT_TURN
    if theta_c < b3:
        return Morphology.FRICTION_LOCKED
    return Morphology.NEGATIVE_PIVOT


def classify_morphology(
    g: ContactGeometry,
    strict: bool = True,
    tol: float = 1e-12,
) -> Morphology:
    """Pick the post-contact morphology of a turned robot.

    With strict=False out-of-order boundaries are accepted and the branch
    order decides (an empty PaT band simply never matches); the simulator
    relies on this for very short post-turn segments. Use `near_boundary`
    to flag contacts close to a transition.
    """
    b1, b2, b3 = morphology_boundaries(g)
    if strict and not (b1 <= b2 + tol and b2 <= b3 + tol):
        raise ClassificationDegenerateError(
            f"boundaries out of order: {math.degrees(b1):.4f}, {math.degrees(b2):.4f}, {math.degrees(b3):.4f} deg"
        )
    return classify_angles(g.theta_c, b1, b2, b3)


def near_boundary(g: ContactGeometry, band: float) -> bool:
    """True when theta_c is within `band` radians of any boundary."""
    if band <= 0:
        return False
    return any(abs(g.theta_c - b) <= band for b in morphology_boundaries(g))


def mirror_contact(theta_c: float, theta_t: float) -> tuple[float, float]:
    """Express a contact in the frame where the turn angle is non-negative."""
    if theta_t < 0:
        return math.pi - theta_c, -theta_t
    return theta_c, theta_t
