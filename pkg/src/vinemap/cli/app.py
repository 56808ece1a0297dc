"""Command-line runner: simulate, map, benchmark and reconstruct."""

from __future__ import annotations

import argparse
import logging
import math
import re
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import Environment, GeometryError
from ..mapping import (
    INFO_MODES,
    POLICIES,
    Belief,
    GridSpec,
    generate_action_space,
    nonuniform_scene,
    observe,
    rasterize,
    run_campaign,
    uniform_scene,
)
from ..mapping.sampling import substream
from ..sensing import DEFAULT_MU, add_noise, reconstruct, synthesize_stream
from ..simulator import DeploymentAction, simulate
from .io import (
    FormatError,
    action_to_dict,
    environment_to_dict,
    grid_to_rows,
    load_environment,
    load_sensor_stream,
    make_log,
    reconstruction_to_dict,
    result_to_dict,
    save_sensor_stream,
    write_log,
)
from .svg import render_svg

MODES = ("simulate", "map", "benchmark", "reconstruct")
SPACES = ("straight", "turning")
EXIT_OK, EXIT_FLAGGED, EXIT_INVALID = 0, 1, 2
_SCENE = re.compile(r"^(uniform|nonuniform):(\d+)(?::(\d+))?$")
_STREAM_NOISE_KEY = 3  # substream key for synthesized sensor noise

log = logging.getLogger("vinemap")


class ConfigError(ValueError):
    """A run configuration missing what its mode needs."""


@dataclass
class RunConfig:
    mode: str
    env: list[str] = field(default_factory=list)  # paths or generated scenes "uniform:3[:seed]"
    seed: int | None = None
    budget: int = 20
    policies: list[str] = field(default_factory=lambda: list(POLICIES))
    info_mode: str = "full"
    action_space: str = "straight"
    out: str = "."
    svg: bool = False
    # simulate
    launch: str | None = None
    angle: float | None = None
    turn_fraction: float | None = None
    turn_angle: float = 0.0
    max_length: float = 1.0
    stream_out: str | None = None
    noise_deg: float = 0.0
    # map / benchmark
    mc_envs: int = 5
    repetitions: int = 100
    workers: int = 1
    scenes: str | None = None  # benchmark: "uniform" or "nonuniform"
    count: int = 10
    # reconstruct
    stream: str | None = None
    mu: float = DEFAULT_MU

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        if self.mode in ("map", "benchmark") and self.seed is None:
            raise ConfigError(f"--seed is required for {self.mode}")
        if self.mode in ("simulate", "map") and len(self.env) != 1:
            raise ConfigError(f"{self.mode} needs exactly one --env")
        if self.mode == "simulate" and (self.launch is None or self.angle is None):
            raise ConfigError("simulate needs --launch and --angle")
        if self.mode == "benchmark" and not self.env and self.scenes is None:
            raise ConfigError("benchmark needs --env or --scenes")
        if self.mode == "reconstruct" and self.stream is None:
            raise ConfigError("reconstruct needs --stream")
        if self.noise_deg > 0 and self.seed is None:
            raise ConfigError("--noise-deg needs --seed")
        for p in self.policies:
            if p not in POLICIES:
                raise ConfigError(f"unknown policy {p!r}")
        if self.info_mode not in INFO_MODES:
            raise ConfigError(f"unknown information mode {self.info_mode!r}")
        if self.action_space not in SPACES:
            raise ConfigError(f"unknown action space {self.action_space!r}")
        if self.budget < 0:
            raise ConfigError("--budget must be non-negative")

    def echo(self) -> dict:
        """The configuration as logged; output location and worker count do not affect results."""
        d = asdict(self)
        for k in ("out", "workers", "svg"):
            d.pop(k)
        return d


def resolve_environment(ref: str) -> Environment:
    """A file path, or a generated scene written kind:index[:seed]."""
    m = _SCENE.match(ref)
    if m:
        make = uniform_scene if m.group(1) == "uniform" else nonuniform_scene
        return make(int(m.group(2)), seed=int(m.group(3) or 0))
    return load_environment(ref)


def _action(cfg: RunConfig) -> DeploymentAction:
    turn = cfg.turn_fraction if cfg.turn_angle else None
    return DeploymentAction(cfg.launch, float(cfg.angle), turn, float(cfg.turn_angle), float(cfg.max_length))


def run_simulate(cfg: RunConfig, out: Path) -> tuple[dict, int]:
    env = resolve_environment(cfg.env[0])
    if cfg.launch not in {lp.id for lp in env.launch_points}:
        raise ConfigError(f"environment has no launch point {cfg.launch!r}")
    t0 = time.perf_counter()
    res = simulate(env, _action(cfg))
    elapsed = time.perf_counter() - t0
    spec = GridSpec(env.bounds)
    hit, miss = rasterize(env, res, spec)
    body = {"environment": environment_to_dict(env), "result": result_to_dict(res, hit, miss)}
    if cfg.stream_out:
        stream = synthesize_stream(env, res)
        if cfg.noise_deg > 0:
            stream = add_noise(stream, substream(cfg.seed, _STREAM_NOISE_KEY), math.radians(cfg.noise_deg))
        save_sensor_stream(stream, cfg.stream_out)
        body["stream_samples"] = len(stream)
    if cfg.svg:
        render_svg(env, out / "simulate.svg", (res,))
    return make_log(cfg.echo(), spec, body, {"simulate_s": elapsed}), EXIT_FLAGGED if res.flagged else EXIT_OK


def _campaign_entry(space, truth, c) -> dict:
    """Per-loop action and score; Ideal and MC also carry the cumulative grids after each loop."""
    loops = [{"action_index": i, "action": action_to_dict(space[i]), "score": s} for i, s in zip(c.actions, c.scores)]
    entry = {"policy": c.policy, "final_score": c.final_score, "loops": loops, "mc_flagged": c.flagged - truth.flagged}
    if c.policy == "random":
        entry["score_std"] = list(c.score_std)
        entry["final_std"] = c.final_std
        entry["note"] = "scores are means over repetitions; actions are the first repetition"
    elif loops:
        idx = list(c.actions)
        hits = np.logical_or.accumulate(truth.hit[idx], axis=0)
        misses = np.logical_or.accumulate(truth.miss[idx], axis=0)
        for loop, h, m in zip(loops, hits, misses):
            loop["belief"] = {"hit": grid_to_rows(h), "miss": grid_to_rows(m)}
    return entry


def _campaigns(cfg: RunConfig, env: Environment):
    space = generate_action_space(cfg.action_space, env.launch_points)
    spec = GridSpec(env.bounds)
    t0 = time.perf_counter()
    truth = observe(env, space, cfg.info_mode, spec)
    timings = {"observe_s": time.perf_counter() - t0}
    out = []
    for p in cfg.policies:
        t0 = time.perf_counter()
        c = run_campaign(
            env, space, cfg.budget, p, cfg.seed, cfg.info_mode, cfg.mc_envs, cfg.repetitions, cfg.workers, spec, truth
        )
        timings[f"{p}_s"] = time.perf_counter() - t0
        timings[f"{p}_loops_s"] = list(c.timings)
        out.append(c)
    return space, truth, out, timings


def run_map(cfg: RunConfig, out: Path) -> tuple[dict, int]:
    env = resolve_environment(cfg.env[0])
    space, truth, camps, timings = _campaigns(cfg, env)
    body = {
        "environment": environment_to_dict(env),
        "action_space_size": len(space),
        "flagged": truth.flagged,
        "campaigns": [_campaign_entry(space, truth, c) for c in camps],
    }
    if cfg.svg:
        spec = GridSpec(env.bounds)
        for c in camps:
            if c.final_hit is not None:
                render_svg(env, out / f"map_{c.policy}.svg", belief=Belief(spec, c.final_hit, c.final_miss))
    return make_log(cfg.echo(), GridSpec(env.bounds), body, timings), EXIT_FLAGGED if truth.flagged else EXIT_OK


def run_benchmark(cfg: RunConfig, out: Path) -> tuple[dict, int]:
    refs = list(cfg.env) or [f"{cfg.scenes}:{i}" for i in range(cfg.count)]
    scenes, timings, flagged = [], {}, 0
    finals: dict[str, list] = {p: [] for p in cfg.policies}
    for ref in refs:
        env = resolve_environment(ref)
        space, truth, camps, t = _campaigns(cfg, env)
        flagged += truth.flagged
        timings[ref] = t
        row = {"scene": ref, "flagged": truth.flagged}
        for c in camps:
            row[c.policy] = {"final": c.final_score, "std": c.final_std} if c.policy == "random" else {"final": c.final_score}
            finals[c.policy].append(c.final_score)
        scenes.append(row)
    summary = {p: {"mean": float(np.mean(v)), "std": float(np.std(v))} for p, v in finals.items() if v}
    if "random" in finals and finals["random"]:
        summary["random"]["repetition_std"] = float(np.mean([r["random"]["std"] for r in scenes]))
    lines = [f"{'policy':<12} {'mean':>8} {'std':>8}"] + [f"{p:<12} {s['mean']:8.2f} {s['std']:8.2f}" for p, s in summary.items()]
    print("\n".join(lines))
    body = {"scenes": scenes, "summary": summary, "flagged": flagged}
    spec = GridSpec()
    return make_log(cfg.echo(), spec, body, timings), EXIT_FLAGGED if flagged else EXIT_OK


def run_reconstruct(cfg: RunConfig, out: Path) -> tuple[dict, int]:
    env = resolve_environment(cfg.env[0]) if cfg.env else None
    launch = None
    if cfg.launch is not None:
        if env is None or cfg.launch not in {lp.id for lp in env.launch_points}:
            raise ConfigError("--launch needs an --env that defines it")
        launch = env.launch(cfg.launch).position
    stream = load_sensor_stream(cfg.stream, launch, cfg.angle)
    radius = env.robot_radius if env is not None else None
    t0 = time.perf_counter()
    kw = {"mu": cfg.mu, "noise": math.radians(cfg.noise_deg)}
    if radius is not None:
        kw["radius"] = radius
    rec = reconstruct(stream, **kw)
    elapsed = time.perf_counter() - t0
    body = {"samples": len(stream), "reconstruction": reconstruction_to_dict(rec)}
    spec = GridSpec(env.bounds) if env is not None else GridSpec()
    if cfg.svg and env is not None:
        render_svg(env, out / "reconstruct.svg", reconstruction=rec)
    return make_log(cfg.echo(), spec, body, {"reconstruct_s": elapsed}), EXIT_OK


_RUNNERS = {"simulate": run_simulate, "map": run_map, "benchmark": run_benchmark, "reconstruct": run_reconstruct}


def run(cfg: RunConfig) -> tuple[dict, int]:
    """Validate, dispatch, write `<mode>.json` under cfg.out and return (log, exit code)."""
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    result, code = _RUNNERS[cfg.mode](cfg, out)
    write_log(result, out / f"{cfg.mode}.json")
    return result, code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vinemap", description=__doc__)
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--env", action="append", default=[], help="environment file or kind:index[:seed] (repeatable for benchmark)")
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--policy", default="all", help="comma list of monte-carlo, ideal, random, or 'all'")
    p.add_argument("--info-mode", default="full", choices=INFO_MODES)
    p.add_argument("--action-space", default="straight", choices=SPACES)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--svg", action="store_true", help="also write SVG panels")
    g = p.add_argument_group("simulate")
    g.add_argument("--launch", help="launch point id")
    g.add_argument("--angle", type=float, help="launch angle, degrees")
    g.add_argument("--turn-fraction", type=float)
    g.add_argument("--turn-angle", type=float, default=0.0, help="degrees, counter-clockwise positive")
    g.add_argument("--max-length", type=float, default=1.0)
    g.add_argument("--stream-out", help="write the synthesized sensor stream CSV here")
    g.add_argument("--noise-deg", type=float, default=0.0, help="contact angle noise sigma, degrees")
    g = p.add_argument_group("map and benchmark")
    g.add_argument("--mc-envs", type=int, default=5)
    g.add_argument("--repetitions", type=int, default=100, help="random-policy repetitions")
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--scenes", choices=("uniform", "nonuniform"))
    g.add_argument("--count", type=int, default=10)
    g = p.add_argument_group("reconstruct")
    g.add_argument("--stream", help="sensor stream CSV")
    g.add_argument("--mu", type=float, default=DEFAULT_MU)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    policies = list(POLICIES) if ns.policy == "all" else [s.strip() for s in ns.policy.split(",") if s.strip()]
    return RunConfig(
        mode=ns.mode,
        env=list(ns.env),
        seed=ns.seed,
        budget=ns.budget,
        policies=policies,
        info_mode=ns.info_mode,
        action_space=ns.action_space,
        out=ns.out,
        svg=ns.svg,
        launch=ns.launch,
        angle=ns.angle,
        turn_fraction=ns.turn_fraction,
        turn_angle=ns.turn_angle,
        max_length=ns.max_length,
        stream_out=ns.stream_out,
        noise_deg=ns.noise_deg,
        mc_envs=ns.mc_envs,
        repetitions=ns.repetitions,
        workers=ns.workers,
        scenes=ns.scenes,
        count=ns.count,
        stream=ns.stream,
        mu=ns.mu,
    )


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    ns = build_parser().parse_args(argv)
    try:
        _, code = run(config_from_args(ns))
    except (ConfigError, FormatError, GeometryError, ValueError, OSError) as exc:
        print(f"vinemap: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if code == EXIT_FLAGGED:
        print("vinemap: a deployment hit the simulation loop limit", file=sys.stderr)
    return code
