"""Occupancy-grid belief, scoring, Monte Carlo environment sampling and deployment planning."""

from .actions import generate_action_space, launch_angles
from .belief import PRIOR, Belief, UndefinedScoreError, belief_values, raw_score, score
from .grid import GRID_SIZE, GridSpec, cover_polygons, cover_triangles, rasterize, rubric
from .planner import (
    INFO_MODES,
    POLICIES,
    CampaignResult,
    Observations,
    PlannerState,
    observe,
    plan_next,
    restrict_information,
    run_campaign,
)
from .sampling import cell_groups, draw_occupancy, sample_environment, substream
from .scenes import default_launch_points, nonuniform_scene, uniform_scene

__all__ = [
    "GRID_SIZE",
    "INFO_MODES",
    "POLICIES",
    "PRIOR",
    "Belief",
    "CampaignResult",
    "GridSpec",
    "Observations",
    "PlannerState",
    "UndefinedScoreError",
    "belief_values",
    "cell_groups",
    "cover_polygons",
    "cover_triangles",
    "default_launch_points",
    "draw_occupancy",
    "generate_action_space",
    "launch_angles",
    "nonuniform_scene",
    "observe",
    "plan_next",
    "rasterize",
    "raw_score",
    "restrict_information",
    "rubric",
    "run_campaign",
    "sample_environment",
    "score",
    "substream",
    "uniform_scene",
]
