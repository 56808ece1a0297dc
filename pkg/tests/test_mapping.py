import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vinemap.geometry import Bounds, Environment, LaunchPoint, Polygon, PointLocation, point_in_polygon
from vinemap.mapping import (
    PRIOR,
    Belief,
    GridSpec,
    Observations,
    PlannerState,
    UndefinedScoreError,
    belief_values,
    cell_groups,
    cover_polygons,
    cover_triangles,
    draw_occupancy,
    generate_action_space,
    launch_angles,
    nonuniform_scene,
    observe,
    plan_next,
    rasterize,
    restrict_information,
    rubric,
    run_campaign,
    sample_environment,
    score,
    substream,
    uniform_scene,
)
from vinemap.mapping.grid import HIT_DEPTH
from vinemap.simulator import DeploymentAction, simulate

from oracles import clip_coverage, supersampled_coverage
from scenes import box

H = 1.0 / 35


def env_of(polys, radius=0.0323, launches=((1 / 3, 0.0), (2 / 3, 0.0))):
    lps = tuple(LaunchPoint(k, p) for k, p in zip("ab", launches))
    return Environment(tuple(polys), Bounds(), lps, radius)


# -- grid coverage ------------------------------------------------------------


def test_cover_axis_aligned_square_is_exact():
    spec = GridSpec()
    sq = Polygon([(0, 0), (2 * H, 0), (2 * H, 2 * H), (0, 2 * H)])
    got = cover_polygons(spec, [sq])
    want = spec.zeros()
    want[:2, :2] = True
    assert np.array_equal(got, want)
    # a square strictly inside one cell marks only that cell
    inner = Polygon([(5.2 * H, 7.2 * H), (5.8 * H, 7.2 * H), (5.8 * H, 7.8 * H), (5.2 * H, 7.8 * H)])
    got = cover_polygons(spec, [inner])
    assert np.argwhere(got).tolist() == [[7, 5]]


def test_cover_empty():
    spec = GridSpec()
    assert not cover_triangles(spec, []).any()
    degenerate = [((0.1, 0.1), (0.5, 0.5), (0.9, 0.9))]
    assert not cover_triangles(spec, degenerate).any()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=6, max_size=6))
def test_cover_matches_clipping_oracle(xs):
    tri = [(xs[0], xs[1]), (xs[2], xs[3]), (xs[4], xs[5])]
    a = abs((xs[2] - xs[0]) * (xs[5] - xs[1]) - (xs[3] - xs[1]) * (xs[4] - xs[0])) / 2
    if a < 1e-4:
        return
    n = 12
    got = cover_triangles(GridSpec(n=n), [tri])
    area = clip_coverage(tri, n)
    # cells with a clear share of area are covered, cells with none are not
    assert got[area > 1e-7].all()
    assert not got[area == 0].any()
    # every supersample that lands inside the triangle lies in a covered cell
    assert got[supersampled_coverage(tri, n) > 0].all()


def test_rubric_marks_partial_cells():
    env = env_of([box(0.5 * H, 0.5 * H, 2.5 * H, 1.5 * H)])
    r = rubric(env)
    assert r.dtype == float
    assert np.argwhere(r).tolist() == [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]


def test_rasterize_no_contact_has_no_hits():
    env = env_of([])
    res = simulate(env, DeploymentAction("a", 90.0))
    hit, miss = rasterize(env, res)
    assert not hit.any()
    # the body corridor x in [1/3 - r, 1/3 + r] spans cells 10.5 to 12.8, full height
    cols = np.unique(np.argwhere(miss)[:, 1]).tolist()
    assert cols == [10, 11, 12]
    assert miss[:, 10:13].all()


def test_wall_along_a_row_hits_only_that_row():
    y = 20 * H
    env = env_of([box(0.05, y, 0.95, y + 0.1)])
    res = simulate(env, DeploymentAction("a", 60.0))
    assert res.walls_hit
    hit, miss = rasterize(env, res)
    cells = np.argwhere(hit)
    assert set(cells[:, 0].tolist()) == {20}
    cols = sorted(cells[:, 1].tolist())
    assert cols == list(range(cols[0], cols[-1] + 1))
    # the contacted stretch of the true wall spans the marked columns
    # (the first, point-like contact is widened by half a radius either side)
    xs = [p[0] for s in res.wall_contacts for p in (s.a, s.b)]
    assert math.floor((min(xs) - env.robot_radius / 2) / H) <= cols[0] and cols[-1] <= math.floor(max(xs) / H)
    assert not (hit & (rubric(env) == 0)).any()
    assert HIT_DEPTH < H


def test_hits_stay_inside_the_true_obstacles():
    for i in range(3):
        env = uniform_scene(i)
        occ = rubric(env) > 0
        for a in generate_action_space("straight", env.launch_points)[::7]:
            hit, miss = rasterize(env, simulate(env, a))
            assert not (hit & ~occ).any()


# -- belief and score ---------------------------------------------------------


def test_belief_cell_values_exact():
    hit = np.array([[True, False], [True, False]])
    miss = np.array([[False, True], [True, False]])
    v = belief_values(hit, miss)
    assert v[0, 0] == 1.0 and v[0, 1] == 0.0 and v[1, 0] == 0.5 and v[1, 1] == 1.0 / 3.0
    assert Belief().values.max() == PRIOR


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_belief_update_is_idempotent_and_monotone(seed):
    rng = np.random.default_rng(seed)
    spec = GridSpec(n=8)
    h, m = rng.random((2, 8, 8)) < 0.4
    b = Belief(spec).update(h, m)
    assert b.update(h, m) == b
    h2, m2 = rng.random((2, 8, 8)) < 0.4
    c = b.update(h2, m2)
    assert (c.hit >= b.hit).all() and (c.miss >= b.miss).all()
    # cells seen stay seen; cells never seen keep the prior
    seen = b.hit | b.miss
    assert ((c.hit | c.miss) >= seen).all()
    unseen = ~(c.hit | c.miss)
    assert (c.values[unseen] == PRIOR).all()
    assert set(np.unique(c.values[~unseen])) <= {0.0, 0.5, 1.0}


def test_belief_validation():
    with pytest.raises(ValueError):
        Belief(GridSpec(n=4), np.zeros((3, 3), bool))
    with pytest.raises(ValueError):
        Belief(prior=1.5)
    b = Belief(GridSpec(n=4))
    with pytest.raises(ValueError):
        b.update(np.zeros((5, 5), bool), np.zeros((5, 5), bool))
    assert not b.hit.flags.writeable


def test_score_fixed_points_exact():
    env = uniform_scene(0)
    r = rubric(env)
    assert score(r, r) == 100.0
    assert score(np.full(r.shape, PRIOR), r) == 0.0
    assert score(Belief(), r) == 0.0


def test_score_hand_example():
    # 10 of 100 cells occupied; a belief of all zeros scores 90 raw.
    r = np.zeros((10, 10))
    r[0, :] = 1
    # prior raw: 100 * (0.9 * 2/3 + 0.1 * 1/3) = 190/3; weighted: (90 - 190/3) / (100 - 190/3) = 8/11
    assert score(np.zeros((10, 10)), r) == pytest.approx(800 / 11, abs=1e-12)
    with pytest.raises(UndefinedScoreError):
        score(np.zeros((10, 10)), np.zeros((10, 10)), prior=0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_score_stack_matches_single(seed):
    rng = np.random.default_rng(seed)
    r = (rng.random((6, 6)) < 0.3).astype(float)
    if not r.any():
        r[0, 0] = 1
    x = rng.random((4, 6, 6))
    s = score(x, r)
    assert s.shape == (4,)
    for k in range(4):
        assert s[k] == pytest.approx(score(x[k], r), abs=1e-12)
        assert s[k] <= 100.0 + 1e-12


# -- Monte Carlo environments -------------------------------------------------


def test_substreams_are_reproducible_and_distinct():
    a = substream(4, 0, 1, 2).random(5)
    assert np.array_equal(a, substream(4, 0, 1, 2).random(5))
    assert not np.array_equal(a, substream(4, 0, 1, 3).random(5))
    assert not np.array_equal(a, substream(5, 0, 1, 2).random(5))


def test_prior_draw_fraction():
    b = Belief(GridSpec(n=100))
    frac = draw_occupancy(b, substream(0, 9)).mean()
    assert abs(frac - 1 / 3) < 0.03


def test_sample_extremes():
    like = uniform_scene(0)
    spec = GridSpec()
    empty = Belief(spec, spec.zeros(), ~spec.zeros())
    assert sample_environment(empty, substream(0, 1), like).obstacles == ()
    # everything occupied above two free rows: one obstacle, clear of the launch points
    hit = ~spec.zeros()
    hit[:2] = False
    full = Belief(spec, hit, ~hit)
    env = sample_environment(full, substream(0, 1), like)
    assert len(env.obstacles) == 1
    assert env.obstacles[0].area == pytest.approx(33 / 35)
    # all hit: hits always stay covered, even over the launch points
    env = sample_environment(Belief(spec, ~spec.zeros()), substream(0, 1), like)
    assert len(env.obstacles) == 1 and env.obstacles[0].area == pytest.approx(1.0)
    # all occupied by the draw alone: launch points are kept clear, so nothing is left
    ones = Belief(spec, spec.zeros(), spec.zeros(), prior=1.0)
    assert sample_environment(ones, substream(0, 1), like).obstacles == ()
    assert env.launch_points == like.launch_points and env.robot_radius == like.robot_radius


def test_cell_groups_keep_largest_and_absorb_hits():
    occ = np.zeros((10, 10), bool)
    occ[0:3, 0:3] = True  # 9 cells
    occ[6:8, 6:8] = True  # 4 cells
    occ[0, 9] = True  # 1 cell
    hit = np.zeros_like(occ)
    hit[9, 9] = True  # stray hit, nearest to the 4-cell group
    groups = cell_groups(occ, hit, 2)
    assert [len(g) for g in groups] == [9, 5]
    assert [9, 9] in groups[1].tolist()
    # diagonal neighbours join under 8-connectivity
    diag = np.eye(4, dtype=bool)
    assert len(cell_groups(diag, np.zeros_like(diag), 5)) == 1


def test_sampled_environments_cover_hits():
    like = uniform_scene(4)
    space = generate_action_space("straight", like.launch_points)
    truth = observe(like, space)
    spec = GridSpec()
    cx, cy = spec.centers()
    for seed in range(25):
        rng = np.random.default_rng(seed)
        b = Belief(spec)
        for i in rng.choice(len(space), 6, replace=False):
            b = b.update(truth.hit[i], truth.miss[i])
        env = sample_environment(b, substream(seed, 0), like)
        env.validate()
        for r, c in np.argwhere(b.hit):
            p = (cx[r, c], cy[r, c])
            assert any(point_in_polygon(p, o) is not PointLocation.OUTSIDE for o in env.obstacles)


# -- actions ------------------------------------------------------------------


def test_action_space_sizes():
    lps = uniform_scene(0).launch_points
    s = generate_action_space("straight", lps)
    t = generate_action_space("turning", lps)
    assert len(s) == 100 and len(t) == 570
    assert len(set(s)) == 100 and len(set(t)) == 570
    assert all(0 < a.launch_angle < 180 for a in s + t)
    assert launch_angles(50)[0] == pytest.approx(1.8)
    assert len(generate_action_space("turning", lps[:1])) == 285
    with pytest.raises(ValueError):
        generate_action_space("spiral", lps)


# -- information modes and observation ----------------------------------------


def test_restrict_information():
    env = env_of([box(0.05, 0.5, 0.95, 0.6)])
    res = simulate(env, DeploymentAction("a", 60.0))
    full = rasterize(env, res)
    area = rasterize(env, restrict_information(res, "area-only"))
    wall = rasterize(env, restrict_information(res, "wall-only"))
    assert full[0].any()
    assert not area[0].any() and np.array_equal(area[1], full[1])
    assert np.array_equal(wall[0], full[0]) and not wall[1].any()
    assert restrict_information(res, "full") is res
    with pytest.raises(ValueError):
        restrict_information(res, "none")


def test_observe_reuse_matches_direct_simulation():
    env = nonuniform_scene(1)
    full = generate_action_space("turning", env.launch_points)
    lengths = {a.launch_angle: simulate(env, a).length for a in full[:285] if not a.is_turning}
    short = min(lengths, key=lengths.get)  # stops before the last turn length
    assert lengths[short] < 0.6
    space = [a for a in full[:285] if a.launch_angle in (short, max(lengths, key=lengths.get))]
    assert len(space) == 38
    obs = observe(env, space)
    for i, a in enumerate(space):
        h, m = rasterize(env, simulate(env, a))
        assert np.array_equal(obs.hit[i], h) and np.array_equal(obs.miss[i], m)


# -- planning -----------------------------------------------------------------


def _single_target():
    """One tiny square straight ahead of launch angle index 25 (91.8 deg) from 'a'."""
    r = 0.005
    lp = (1 / 3, 0.0)
    ang = math.radians(launch_angles(50)[25])
    c = (lp[0] + 0.6 * math.cos(ang), 0.6 * math.sin(ang))
    sq = box(c[0] - 0.01, c[1] - 0.01, c[0] + 0.01, c[1] + 0.01)
    return env_of([sq], radius=r, launches=(lp,))


def test_plan_next_picks_the_only_informative_action():
    env = _single_target()
    space = generate_action_space("straight", env.launch_points)
    spec = GridSpec()
    occ = rubric(env, spec) > 0
    b = Belief(spec, spec.zeros(), ~occ)  # everything known free except the obstacle cells
    state = PlannerState(env, space, b, seed=0, mc_envs=1, sampler=lambda belief, rng, like: env)
    assert plan_next(state) == 25
    state.used.add(25)
    assert plan_next(state) != 25


def test_plan_next_ties_go_to_lowest_index():
    env = _single_target()
    space = generate_action_space("straight", env.launch_points)
    spec = GridSpec()
    occ = rubric(env, spec) > 0
    b = Belief(spec, occ, ~occ)  # already equal to the rubric: no action can help
    state = PlannerState(env, space, b, seed=0, mc_envs=2, sampler=lambda belief, rng, like: env)
    assert plan_next(state) == 0
    state.used.update({0, 1})
    assert plan_next(state) == 2


def test_plan_next_is_deterministic():
    env = uniform_scene(2)
    space = generate_action_space("straight", env.launch_points)
    obs = observe(env, space[40:41])
    b = Belief(GridSpec()).update(obs.hit[0], obs.miss[0])
    s1 = PlannerState(env, space, b, seed=3, mc_envs=2)
    s2 = PlannerState(env, space, b, seed=3, mc_envs=2)
    assert plan_next(s1) == plan_next(s2)


def test_campaign_budget_zero_and_mismatch():
    env = uniform_scene(0)
    space = generate_action_space("straight", env.launch_points)
    r = run_campaign(env, space, 0)
    assert r.actions == () and r.final_score == 0.0
    with pytest.raises(ValueError):
        run_campaign(env, space, 1, policy="greedy")


def test_campaigns_are_deterministic_and_ideal_leads():
    env = uniform_scene(1)
    space = generate_action_space("straight", env.launch_points)
    truth = observe(env, space)
    a = run_campaign(env, space, 3, "monte-carlo", seed=2, mc_envs=2, truth=truth)
    b = run_campaign(env, space, 3, "monte-carlo", seed=2, mc_envs=2, truth=truth)
    assert a == b and len(set(a.actions)) == 3
    ideal = run_campaign(env, space, 3, "ideal", truth=truth)
    rnd = run_campaign(env, space, 3, "random", seed=2, repetitions=20, truth=truth)
    assert ideal.final_score >= rnd.final_score
    assert len(rnd.score_std) == 3 and rnd == run_campaign(env, space, 3, "random", seed=2, repetitions=20, truth=truth)
    # the scores trace the stated actions
    bel = Belief(GridSpec())
    for i, s in zip(ideal.actions, ideal.scores):
        bel = bel.update(truth.hit[i], truth.miss[i])
        assert score(bel, rubric(env)) == s
    assert isinstance(truth, Observations)


# -- scenes -------------------------------------------------------------------


def test_scenes():
    for i in range(10):
        env = uniform_scene(i)
        assert 3 <= len(env.obstacles) <= 5
        assert {round(o.area, 12) for o in env.obstacles} == {round(0.12**2, 12)}
        env.validate()
    assert uniform_scene(3) == uniform_scene(3)
    for i in range(5):
        env = nonuniform_scene(i)
        assert 3 <= len(env.obstacles) <= 5
        assert any(not o.is_convex() for o in env.obstacles)
