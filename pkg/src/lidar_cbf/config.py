"""Scenario and world files (TOML). Angles are degrees on disk, radians in memory."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .barrier import CompositeParams
from .core import Pose2, SafetyEllipsoid
from .filter import FilterConfig, NominalConfig
from .planner import PlannerConfig
from .sim import DynamicObstacle, LidarConfig, OdometryFault, World


class ConfigError(ValueError):
    pass


GOAL_SOURCES = ("waypoints", "planner")
YAW_MODES = ("goal_heading", "planner", "fixed")


@dataclass(frozen=True)
class MissionConfig:
    goal_source: str = "waypoints"
    waypoints: tuple[tuple[float, float], ...] = ()
    reach_threshold: float = 0.3
    yaw_mode: str = "goal_heading"
    fixed_yaw: float = 0.0
    heading_min_distance: float = 0.3
    horizon: int = 1

    def __post_init__(self):
        if self.goal_source not in GOAL_SOURCES:
            raise ConfigError(f"goal_source must be one of {GOAL_SOURCES}")
        if self.yaw_mode not in YAW_MODES:
            raise ConfigError(f"yaw_mode must be one of {YAW_MODES}")
        if self.goal_source == "waypoints" and not self.waypoints:
            raise ConfigError("waypoint missions need at least one waypoint")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")


@dataclass(frozen=True)
class MetricsConfig:
    deadlock_window: float = 5.0
    deadlock_epsilon: float = 0.05
    collision_tolerance: float = 0.02
    solve_time_bucket: int = 100


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    world: World
    start: Pose2
    ellipsoid: SafetyEllipsoid
    mission: MissionConfig
    composite: CompositeParams = CompositeParams()
    filter: FilterConfig = FilterConfig()
    nominal: NominalConfig = NominalConfig()
    planner: PlannerConfig = PlannerConfig()
    lidar: LidarConfig = LidarConfig()
    faults: tuple[OdometryFault, ...] = ()
    duration: float = 30.0
    rate_hz: float = 50.0
    seed: int = 0
    omega_max: float = 1.0
    yaw_gain: float = 2.0
    metrics: MetricsConfig = MetricsConfig()
    expect: dict[str, Any] = field(default_factory=dict)
    source: str = ""
    world_source: str = ""

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        if not self.rate_hz > 0:
            raise ConfigError("rate_hz must be positive")
        if not self.omega_max > 0:
            raise ConfigError("omega_max must be positive")

    @property
    def dt(self) -> float:
        return 1.0 / self.rate_hz

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration * self.rate_hz))


def _read_toml(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _box_segments(box) -> list:
    x0, y0, x1, y1 = (float(v) for v in box)
    if not (x1 > x0 and y1 > y0):
        raise ConfigError(f"degenerate box {box}")
    c = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
    return [[c[i], c[(i + 1) % 4]] for i in range(4)]


def _segments_from(table: dict) -> list:
    segs = [list(s) for s in table.get("segments", [])]
    for box in table.get("boxes", []):
        segs.extend(_box_segments(box))
    return segs


def world_from_dict(data: dict) -> World:
    dynamic = []
    for ob in data.get("dynamic", []):
        wps = ob.get("waypoints", [])
        if not wps:
            raise ConfigError(f"dynamic obstacle {ob.get('name', '?')!r} has no waypoints")
        times = [float(w["t"]) for w in wps]
        poses = [[float(w.get("x", 0.0)), float(w.get("y", 0.0)), math.radians(float(w.get("theta_deg", 0.0)))]
                 for w in wps]
        dynamic.append(DynamicObstacle(_segments_from(ob), times, poses, name=str(ob.get("name", ""))))
    return World(_segments_from(data), tuple(dynamic))


def load_world(path) -> World:
    path = Path(path)
    try:
        return world_from_dict(_read_toml(path))
    except (ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc


def _pair(value, what: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a pair of numbers, got {value!r}") from exc
    return (x, y)


def scenario_from_dict(data: dict, base_dir: Path = Path("."), source: str = "") -> ScenarioConfig:
    if "world" not in data:
        raise ConfigError("scenario has no 'world' entry")
    world_path = (base_dir / data["world"]).resolve()
    world = load_world(world_path)

    robot = data.get("robot", {})
    filt = data.get("filter", {})
    nom = data.get("nominal", {})
    plan = data.get("planner", {})
    mission = data.get("mission", {})
    lidar = data.get("lidar", {})
    metrics = data.get("metrics", {})

    try:
        start = Pose2(_pair(robot.get("start", (0.0, 0.0)), "robot.start"),
                      math.radians(float(robot.get("start_yaw_deg", 0.0))))
        ellipsoid = SafetyEllipsoid(*_pair(robot.get("semi_axes", (0.9, 0.45)), "robot.semi_axes"))
        cfg = ScenarioConfig(
            name=str(data.get("name", Path(source).stem or "scenario")),
            world=world,
            start=start,
            ellipsoid=ellipsoid,
            mission=MissionConfig(
                goal_source=str(mission.get("goal_source", "waypoints")),
                waypoints=tuple(_pair(w, "mission.waypoints[]") for w in mission.get("waypoints", [])),
                reach_threshold=float(mission.get("reach_threshold", 0.3)),
                yaw_mode=str(mission.get("yaw_mode", "goal_heading")),
                fixed_yaw=math.radians(float(mission.get("fixed_yaw_deg", 0.0))),
                heading_min_distance=float(mission.get("heading_min_distance", 0.3)),
                horizon=int(mission.get("horizon", 1)),
            ),
            composite=CompositeParams(float(filt.get("kappa", 8.0)), float(filt.get("gamma", 0.9))),
            filter=FilterConfig(
                alpha_gain=float(filt.get("alpha", 2.0)),
                u_max=float(filt.get("u_max", 1.0)),
                mode=str(filt.get("mode", "composite_ellipse")),
                s_d=float(filt.get("s_d", 0.8)),
            ),
            nominal=NominalConfig(_pair(nom.get("kp", (4.0, 4.0)), "nominal.kp")),
            planner=PlannerConfig(
                d_view=float(plan.get("d_view", 1.5)),
                gamma_H=float(plan.get("gamma_h", 0.5)),
                gamma_V=float(plan.get("gamma_v", 0.5)),
                fov_h=math.radians(float(plan.get("fov_h_deg", 69.4))),
                fov_v=math.radians(float(plan.get("fov_v_deg", 45.0))),
                goal_reach_threshold=float(plan.get("goal_reach_threshold", 0.3)),
                replan_period=float(plan.get("replan_period", 1.0)),
                sweep_left=str(plan.get("sweep", "left")) == "left",
            ),
            lidar=LidarConfig(
                n_beams=int(lidar.get("n_beams", 720)),
                max_range=float(lidar.get("max_range", 3.5)),
                angular_span=math.radians(float(lidar.get("angular_span_deg", 360.0))),
                range_noise_std=float(lidar.get("range_noise_std", 0.0)),
            ),
            faults=tuple(
                OdometryFault(
                    trigger_time=float(f["trigger_time"]),
                    position_offset=_pair(f.get("position_offset", (0.0, 0.0)), "faults.position_offset"),
                    yaw_offset=math.radians(float(f.get("yaw_offset_deg", 0.0))),
                    drift_rate=_pair(f.get("drift_rate", (0.0, 0.0)), "faults.drift_rate"),
                )
                for f in data.get("faults", [])
            ),
            duration=float(data.get("duration", 30.0)),
            rate_hz=float(data.get("rate_hz", 50.0)),
            seed=int(data.get("seed", 0)),
            omega_max=math.radians(float(robot.get("omega_max_deg", 60.0))),
            yaw_gain=float(robot.get("yaw_gain", 2.0)),
            metrics=MetricsConfig(
                deadlock_window=float(metrics.get("deadlock_window", 5.0)),
                deadlock_epsilon=float(metrics.get("deadlock_epsilon", 0.05)),
                collision_tolerance=float(metrics.get("collision_tolerance", 0.02)),
                solve_time_bucket=int(metrics.get("solve_time_bucket", 100)),
            ),
            expect=dict(data.get("expect", {})),
            source=source,
            world_source=str(world_path),
        )
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{source or 'scenario'}: {exc}") from exc
    return cfg


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    return scenario_from_dict(_read_toml(path), path.parent, source=str(path))


def apply_overrides(cfg: ScenarioConfig, *, kappa=None, gamma=None, alpha=None, u_max=None,
                    mode=None, seed=None, duration=None) -> ScenarioConfig:
    """Command-line overrides; ``None`` keeps the file value."""
    try:
        composite = replace(cfg.composite,
                            **{k: v for k, v in (("kappa", kappa), ("gamma", gamma)) if v is not None})
        filt = replace(cfg.filter, **{k: v for k, v in (("alpha_gain", alpha), ("u_max", u_max), ("mode", mode))
                                      if v is not None})
        changes = {"composite": composite, "filter": filt}
        if seed is not None:
            changes["seed"] = int(seed)
        if duration is not None:
            changes["duration"] = float(duration)
        return replace(cfg, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
