"""Sequential deployment selection: Monte Carlo planner, Ideal and Random baselines."""

from __future__ import annotations

import math
import time
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..geometry import Environment
from ..simulator import DeploymentAction, DeploymentResult, RobotShape, Termination, simulate
from .belief import Belief, belief_values, score
from .grid import GridSpec, rasterize, rubric
from .sampling import STREAM_PLAN, STREAM_RANDOM, sample_environment, substream

INFO_MODES = ("full", "area-only", "wall-only")
POLICIES = ("monte-carlo", "ideal", "random")


def restrict_information(result: DeploymentResult, mode: str) -> DeploymentResult:
    """Drop the wall (area-only) or the swept-area and body (wall-only) part of a result."""
    if mode == "full":
        return result
    if mode == "area-only":
        events = tuple(e for e in result.events if not math.isfinite(e.theta_c))
        return replace(result, walls_hit=(), wall_contacts=(), wall_edges=(), events=events)
    if mode == "wall-only":
        return replace(result, swept_area=(), shape=RobotShape(result.shape.vertices[-1:]))
    raise ValueError(f"unknown information mode {mode!r}")


@dataclass(frozen=True)
class Observations:
    """Stacked (hit, miss) grids, one pair per action, for one environment."""

    hit: np.ndarray  # (A, n, n) bool
    miss: np.ndarray
    flagged: int = 0  # simulations that hit the loop limit


def observe(env: Environment, space, info_mode: str = "full", spec: GridSpec | None = None) -> Observations:
    """Simulate and rasterize every action of `space` in `env`.

    A turning action whose straight counterpart stops before the turn
    length is the same deployment, so its grids are reused.
    """
    spec = GridSpec(env.bounds) if spec is None else spec
    n = len(space)
    hit = np.zeros((n,) + spec.shape, dtype=bool)
    miss = np.zeros_like(hit)
    straight: dict[tuple, tuple] = {}
    flagged = 0

    def run(a: DeploymentAction):
        nonlocal flagged
        r = simulate(env, a)
        flagged += r.flagged
        h, m = rasterize(env, restrict_information(r, info_mode), spec)
        return r, h, m

    for i, a in enumerate(space):
        key = (a.launch_point_id, a.launch_angle, a.max_length)
        if a.is_turning:
            if key not in straight:
                straight[key] = run(DeploymentAction(*key[:2], max_length=a.max_length))
            r, h, m = straight[key]
            if r.termination is not Termination.LENGTH_EXHAUSTED and r.length < a.turn_length - 1e-9:
                hit[i], miss[i] = h, m
                continue
            _, hit[i], miss[i] = run(a)
        else:
            if key not in straight:
                straight[key] = run(a)
            _, hit[i], miss[i] = straight[key]
    return Observations(hit, miss, flagged)


def _gain_scores(belief: Belief, obs: Observations, target: np.ndarray) -> np.ndarray:
    """Score against `target` of the belief after each action's observation."""
    vals = belief_values(belief.hit | obs.hit, belief.miss | obs.miss, belief.prior)
    return score(vals, target, belief.prior)


def _mc_eval(args):
    env, space, info_mode, spec, hit, miss, prior = args
    obs = observe(env, space, info_mode, spec)
    b = Belief(spec, hit, miss, prior)
    return np.atleast_1d(_gain_scores(b, obs, rubric(env, spec))), obs.flagged


@dataclass
class PlannerState:
    like: Environment  # bounds, launch points and radius of the true scene
    space: list
    belief: Belief
    seed: int
    loop: int = 0
    mc_envs: int = 5
    info_mode: str = "full"
    used: set = field(default_factory=set)
    history: list = field(default_factory=list)  # (action index, score)
    executor: Executor | None = None
    flagged: int = 0
    sampler: Callable = sample_environment  # (belief, rng, like) -> Environment


def plan_next(state: PlannerState) -> int:
    """Index of the action with the best summed score over freshly sampled MC environments.

    Actions already deployed are skipped. Ties go to the lowest index.
    """
    spec = state.belief.spec
    envs = [
        state.sampler(state.belief, substream(state.seed, STREAM_PLAN, state.loop, m), state.like)
        for m in range(state.mc_envs)
    ]
    jobs = [(e, state.space, state.info_mode, spec, state.belief.hit, state.belief.miss, state.belief.prior) for e in envs]
    mapper = state.executor.map if state.executor is not None else map
    total = np.zeros(len(state.space))
    for s, fl in mapper(_mc_eval, jobs):
        total += s
        state.flagged += fl
    if state.used:
        total[list(state.used)] = -np.inf
    return int(np.argmax(total))


@dataclass(frozen=True)
class CampaignResult:
    policy: str
    actions: tuple[int, ...]  # indices into the action space (Random: first repetition)
    scores: tuple[float, ...]  # score after each deployment (Random: mean over repetitions)
    score_std: tuple[float, ...] = ()  # Random only
    final_hit: np.ndarray | None = field(default=None, repr=False, compare=False)
    final_miss: np.ndarray | None = field(default=None, repr=False, compare=False)
    timings: tuple[float, ...] = field(default=(), compare=False)  # seconds per loop
    flagged: int = 0

    @property
    def final_score(self) -> float:
        return self.scores[-1] if self.scores else 0.0

    @property
    def final_std(self) -> float:
        return self.score_std[-1] if self.score_std else 0.0


def run_campaign(
    env: Environment,
    space,
    budget: int = 20,
    policy: str = "monte-carlo",
    seed: int = 0,
    info_mode: str = "full",
    mc_envs: int = 5,
    repetitions: int = 100,
    workers: int = 1,
    spec: GridSpec | None = None,
    truth: Observations | None = None,
) -> CampaignResult:
    """Deploy `budget` actions chosen by `policy`, scoring each belief against the true rubric.

    `truth` may carry precomputed observe(env, space, info_mode) grids.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    spec = GridSpec(env.bounds) if spec is None else spec
    budget = min(int(budget), len(space))
    if budget <= 0:
        return CampaignResult(policy, (), ())
    truth = observe(env, space, info_mode, spec) if truth is None else truth
    target = rubric(env, spec)
    if policy == "random":
        return _random(truth, target, spec, budget, seed, repetitions)
    belief = Belief(spec)
    state = PlannerState(env, list(space), belief, seed, mc_envs=mc_envs, info_mode=info_mode)
    chosen, scores, timings = [], [], []
    pool = ProcessPoolExecutor(workers) if workers > 1 and policy == "monte-carlo" else None
    state.executor = pool
    try:
        for t in range(budget):
            t0 = time.perf_counter()
            state.loop = t
            if policy == "monte-carlo":
                i = plan_next(state)
            else:
                g = np.atleast_1d(_gain_scores(state.belief, truth, target))
                g[list(state.used)] = -np.inf
                i = int(np.argmax(g))
            state.used.add(i)
            state.belief = state.belief.update(truth.hit[i], truth.miss[i])
            chosen.append(i)
            scores.append(score(state.belief, target))
            state.history.append((i, scores[-1]))
            timings.append(time.perf_counter() - t0)
    finally:
        if pool is not None:
            pool.shutdown()
    return CampaignResult(
        policy, tuple(chosen), tuple(scores), (), state.belief.hit, state.belief.miss, tuple(timings), state.flagged + truth.flagged
    )


def _random(truth: Observations, target, spec: GridSpec, budget: int, seed: int, repetitions: int) -> CampaignResult:
    n = len(truth.hit)
    traces = np.zeros((repetitions, budget))
    first = ()
    for rep in range(repetitions):
        order = substream(seed, STREAM_RANDOM, rep).permutation(n)[:budget]
        h = np.logical_or.accumulate(truth.hit[order], axis=0)
        m = np.logical_or.accumulate(truth.miss[order], axis=0)
        traces[rep] = score(belief_values(h, m), target)
        if rep == 0:
            first = tuple(int(i) for i in order)
            fh, fm = h[-1], m[-1]
    return CampaignResult(
        "random", first, tuple(traces.mean(axis=0).tolist()), tuple(traces.std(axis=0).tolist()), fh, fm, (), truth.flagged
    )
