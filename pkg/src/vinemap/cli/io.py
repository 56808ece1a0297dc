"""File formats: environments (JSON), sensor streams (CSV) and result logs (JSON)."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .. import __version__
from ..geometry import Bounds, Environment, GeometryError, LaunchPoint, Polygon
from ..mapping import GridSpec
from ..sensing import Reconstruction, SensorSample, SensorStream
from ..simulator import DeploymentAction, DeploymentResult

ENV_FORMAT = "vinemap-environment"
LOG_FORMAT = "vinemap-log"
FORMAT_VERSION = 1
STREAM_COLUMNS = ("length_m", "contact_flag", "contact_angle_deg")
_STREAM_META = ("launch_x", "launch_y", "launch_angle_deg", "turn_length_m", "turn_angle_deg")


class FormatError(ValueError):
    """A file that does not parse, with the place it went wrong."""


# -- environments --------------------------------------------------------------


def environment_to_dict(env: Environment) -> dict:
    b = env.bounds
    return {
        "format": ENV_FORMAT,
        "version": FORMAT_VERSION,
        "bounds": {"x0": b.x0, "y0": b.y0, "size": b.size},
        "robot_radius": env.robot_radius,
        "launch_points": [{"id": lp.id, "position": list(lp.position)} for lp in env.launch_points],
        "obstacles": [[list(v) for v in p.vertices] for p in env.obstacles],
    }


def _pair(v, where: str) -> tuple[float, float]:
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v)):
        raise FormatError(f"{where}: expected [x, y], got {v!r}")
    return float(v[0]), float(v[1])


def _number(d: dict, key: str, where: str) -> float:
    v = d.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise FormatError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


def _check_version(d, fmt: str, where: str) -> None:
    if not isinstance(d, dict):
        raise FormatError(f"{where}: expected an object at the top level")
    if d.get("format") != fmt:
        raise FormatError(f"{where}: format is {d.get('format')!r}, expected {fmt!r}")
    if d.get("version") != FORMAT_VERSION:
        raise FormatError(f"{where}: unsupported version {d.get('version')!r} (this reader knows {FORMAT_VERSION})")


def environment_from_dict(d: dict, where: str = "environment") -> Environment:
    """Build and validate an Environment; raises FormatError or GeometryError."""
    _check_version(d, ENV_FORMAT, where)
    bd = d.get("bounds", {"x0": 0.0, "y0": 0.0, "size": 1.0})
    if not isinstance(bd, dict):
        raise FormatError(f"{where}.bounds: expected an object")
    bounds = Bounds(_number(bd, "x0", "bounds"), _number(bd, "y0", "bounds"), _number(bd, "size", "bounds"))
    radius = _number(d, "robot_radius", where)
    lps = []
    for i, lp in enumerate(d.get("launch_points", [])):
        w = f"launch_points[{i}]"
        if not isinstance(lp, dict) or not isinstance(lp.get("id"), str):
            raise FormatError(f"{w}: expected {{'id': str, 'position': [x, y]}}")
        lps.append(LaunchPoint(lp["id"], _pair(lp.get("position"), f"{w}.position")))
    obstacles = []
    for i, poly in enumerate(d.get("obstacles", [])):
        if not isinstance(poly, list):
            raise FormatError(f"obstacles[{i}]: expected a vertex list")
        verts = [_pair(v, f"obstacles[{i}][{j}]") for j, v in enumerate(poly)]
        try:
            obstacles.append(Polygon(verts))
        except GeometryError as exc:
            raise GeometryError(f"obstacle {i}: {exc}") from exc
    env = Environment(tuple(obstacles), bounds, tuple(lps), radius)
    env.validate()
    return env


def load_environment(path) -> Environment:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return environment_from_dict(d, str(path))
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_environment(env: Environment, path) -> None:
    Path(path).write_text(dumps(environment_to_dict(env)))


# -- sensor streams ------------------------------------------------------------


def stream_to_csv(stream: SensorStream) -> str:
    """Metadata comment lines, the mandatory header, then one row per sample."""
    buf = io.StringIO()
    buf.write(f"# launch_x={_num(stream.launch.x)}\n# launch_y={_num(stream.launch.y)}\n")
    buf.write(f"# launch_angle_deg={_num(math.degrees(stream.launch_angle))}\n")
    if stream.turn is not None:
        buf.write(f"# turn_length_m={_num(stream.turn[0])}\n# turn_angle_deg={_num(math.degrees(stream.turn[1]))}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STREAM_COLUMNS)
    for s in stream.samples:
        w.writerow([_num(s.length), int(s.contact), _num(math.degrees(s.theta_c)) if s.contact else ""])
    return buf.getvalue()


def save_sensor_stream(stream: SensorStream, path) -> None:
    Path(path).write_text(stream_to_csv(stream))


def parse_sensor_stream(text: str, where: str = "stream", launch=None, launch_angle_deg=None) -> SensorStream:
    """Parse the CSV stream format. `launch` and `launch_angle_deg` override the metadata lines."""
    meta: dict[str, float] = {}
    rows = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            if key.strip() in _STREAM_META:
                try:
                    meta[key.strip()] = float(val)
                except ValueError:
                    raise FormatError(f"{where}: line {lineno}: bad value for {key.strip()}: {val!r}") from None
            continue
        cells = next(csv.reader([line]))
        if not header_seen:
            if tuple(c.strip() for c in cells) != STREAM_COLUMNS:
                raise FormatError(f"{where}: line {lineno}: header must be {','.join(STREAM_COLUMNS)}")
            header_seen = True
            continue
        rows.append((lineno, cells))
    if not header_seen:
        raise FormatError(f"{where}: missing header row {','.join(STREAM_COLUMNS)}")
    samples = []
    last = -math.inf
    for lineno, cells in rows:
        if len(cells) != 3:
            raise FormatError(f"{where}: line {lineno}: expected 3 fields, got {len(cells)}")
        try:
            length = float(cells[0])
        except ValueError:
            raise FormatError(f"{where}: line {lineno}: length_m {cells[0]!r} is not a number") from None
        if not math.isfinite(length) or length < 0:
            raise FormatError(f"{where}: line {lineno}: length_m must be finite and non-negative")
        if length < last:
            raise FormatError(f"{where}: line {lineno}: length_m decreases ({length} after {last})")
        last = length
        flag = cells[1].strip()
        if flag not in ("0", "1"):
            raise FormatError(f"{where}: line {lineno}: contact_flag must be 0 or 1, got {flag!r}")
        if flag == "1":
            try:
                ang = float(cells[2])
            except ValueError:
                raise FormatError(f"{where}: line {lineno}: contact_angle_deg {cells[2]!r} is not a number") from None
            if not 0.0 < ang < 180.0:
                raise FormatError(f"{where}: line {lineno}: contact_angle_deg must lie in (0, 180)")
            samples.append(SensorSample(length, True, math.radians(ang)))
        else:
            if cells[2].strip():
                raise FormatError(f"{where}: line {lineno}: contact_angle_deg must be empty without contact")
            samples.append(SensorSample(length, False))
    if launch is None:
        if "launch_x" not in meta or "launch_y" not in meta:
            raise FormatError(f"{where}: launch position missing (metadata lines or --launch)")
        launch = (meta["launch_x"], meta["launch_y"])
    if launch_angle_deg is None:
        if "launch_angle_deg" not in meta:
            raise FormatError(f"{where}: launch angle missing (metadata line or --angle)")
        launch_angle_deg = meta["launch_angle_deg"]
    turn = None
    if "turn_length_m" in meta:
        turn = (meta["turn_length_m"], math.radians(meta.get("turn_angle_deg", 0.0)))
    return SensorStream(tuple(samples), launch, math.radians(launch_angle_deg), turn)


def load_sensor_stream(path, launch=None, launch_angle_deg=None) -> SensorStream:
    path = Path(path)
    return parse_sensor_stream(path.read_text(), str(path), launch, launch_angle_deg)


# -- result logs -----------------------------------------------------------------


def _num(x: float):
    """Floats as the shortest repr that round-trips; integers stay integers."""
    x = float(x)
    if not math.isfinite(x):
        return None
    return int(x) if x.is_integer() and abs(x) < 2**53 else x


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return _num(v)
    return v


def dumps(d: dict) -> str:
    return json.dumps(_clean(d), sort_keys=True, indent=1) + "\n"


def action_to_dict(a: DeploymentAction) -> dict:
    return {
        "launch_point": a.launch_point_id,
        "launch_angle_deg": a.launch_angle,
        "turn_fraction": a.turn_fraction,
        "turn_angle_deg": a.turn_angle,
        "max_length_m": a.max_length,
    }


def grid_to_rows(g: np.ndarray) -> list:
    """Row-major nested lists; booleans become 0/1."""
    g = np.asarray(g)
    return g.astype(int).tolist() if g.dtype == bool else g.tolist()


def result_to_dict(r: DeploymentResult, hit=None, miss=None) -> dict:
    d = {
        "action": action_to_dict(r.action),
        "termination": r.termination.value,
        "flagged": bool(r.flagged),
        "length_m": r.length,
        "shape": [{"x": v.point[0], "y": v.point[1], "kind": v.kind} for v in r.shape.vertices],
        "walls_hit": [[s.a[0], s.a[1], s.b[0], s.b[1]] for s in r.walls_hit],
        "events": [
            {"kind": e.kind, "x": e.point[0], "y": e.point[1], "length_m": e.length, "theta_c_deg": math.degrees(e.theta_c)}
            for e in r.events
        ],
        "swept_area_m2": sum(p.area for p in r.swept_area),
    }
    if hit is not None:
        d["hit"] = grid_to_rows(hit)
        d["miss"] = grid_to_rows(miss)
    return d


def reconstruction_to_dict(rec: Reconstruction) -> dict:
    return {
        "walls": [{"x": p[0], "y": p[1], "angle_deg": math.degrees(a)} for p, a in rec.wall_points],
        "wall_runs": [{"first": i, "last": j, "angle_deg": math.degrees(a)} for i, j, a in rec.walls],
        "pivots": [[p[0], p[1]] for p in rec.pivots],
        "shape": [{"x": v.point[0], "y": v.point[1], "kind": v.kind} for v in rec.shape.vertices],
        "swept_area_m2": sum(p.area for p in rec.swept),
        "skipped": list(rec.skipped),
    }


def grid_to_dict(spec: GridSpec) -> dict:
    b = spec.bounds
    return {"x0": b.x0, "y0": b.y0, "size": b.size, "n": spec.n}


def make_log(config: dict, spec: GridSpec, body: dict, timings: dict | None = None) -> dict:
    """Assemble a log; `hash` covers everything except `timings`."""
    log = {
        "format": LOG_FORMAT,
        "version": FORMAT_VERSION,
        "vinemap_version": __version__,
        "config": config,
        "grid": grid_to_dict(spec),
        "body": body,
    }
    log = _clean(log)
    log["hash"] = log_hash(log)
    log["timings"] = _clean(timings or {})
    return log


def log_hash(log: dict) -> str:
    hashed = {k: v for k, v in log.items() if k not in ("hash", "timings")}
    return hashlib.sha256(json.dumps(_clean(hashed), sort_keys=True).encode()).hexdigest()


def write_log(log: dict, path) -> None:
    Path(path).write_text(dumps(log))


def load_log(path) -> dict:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    _check_version(d, LOG_FORMAT, str(path))
    if d.get("hash") != log_hash(d):
        raise FormatError(f"{path}: hash does not match the contents")
    return d
