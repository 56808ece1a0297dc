"""Discrete deployment action spaces."""

from __future__ import annotations

import numpy as np

from ..geometry import LaunchPoint
from ..simulator import DeploymentAction

STRAIGHT_ANGLES = 50
TURNING_ANGLES = 15
TURN_FRACTIONS = (0.2, 0.4, 0.6)
TURN_ANGLES = (-60.0, -40.0, -20.0, 20.0, 40.0, 60.0)


def launch_angles(count: int) -> np.ndarray:
    """`count` angles (deg) at the centres of equal bins over (0, 180)."""
    return 180.0 * (np.arange(count) + 0.5) / count


def generate_action_space(kind: str, launch_points, max_length: float = 1.0) -> list[DeploymentAction]:
    """Straight: 50 angles per launch point. Turning: 15 angles, each straight plus 3 x 6 turns.

    Ordered by launch point, then angle, then (straight, turns by fraction then angle).
    """
    ids = [lp.id if isinstance(lp, LaunchPoint) else str(lp) for lp in launch_points]
    if kind == "straight":
        return [DeploymentAction(i, float(a), max_length=max_length) for i in ids for a in launch_angles(STRAIGHT_ANGLES)]
    if kind == "turning":
        out = []
        for i in ids:
            for a in launch_angles(TURNING_ANGLES):
                out.append(DeploymentAction(i, float(a), max_length=max_length))
                out += [DeploymentAction(i, float(a), f, t, max_length) for f in TURN_FRACTIONS for t in TURN_ANGLES]
        return out
    raise ValueError(f"unknown action space {kind!r}")
