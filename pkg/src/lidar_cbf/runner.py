"""Closed-loop scenario execution: planner -> nominal -> barrier -> QP -> simulator."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .barrier import BarrierEvaluation, EmptyScan, composite_from_offsets
from .config import ScenarioConfig
from .core import EstimatedPose, Pose2, RobotState, body_offsets, body_to_world, rotation_matrix, shape_matrix_rate, shape_matrix_world
from .filter import FilterOutput, baseline_from_offsets, clamp_box, nominal_velocity, solve_safety_qp
from .planner import DegenerateDirection, plan_horizon
from .sim import apply_odometry_fault, collision_check, raycast_scan, step_dynamics, yaw_rate_command

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TickRecord:
    t: float
    true_x: float
    true_y: float
    true_yaw: float
    est_x: float
    est_y: float
    est_yaw: float
    goal_x: float
    goal_y: float
    u_nom_x: float
    u_nom_y: float
    u_star_x: float
    u_star_y: float
    H: float
    min_h: float
    n_constraints: int
    constraint_active: bool
    infeasible: bool
    collision: bool
    penetration: float
    solve_time_ns: int = 0
    eval_time_ns: int = 0


TIMING_COLUMNS = ("solve_time_ns", "eval_time_ns")
TICK_COLUMNS = tuple(f.name for f in fields(TickRecord) if f.name not in TIMING_COLUMNS)


@dataclass
class RunSummary:
    name: str
    n_ticks: int
    duration: float
    min_min_h: float
    max_penetration: float
    collision_ticks: int
    deadlock: bool
    goal_reached: bool
    goal_reached_time: float | None
    total_distance: float
    constraint_active_fraction: float
    infeasible_ticks: int
    max_constraints: int
    solve_time_ns: dict
    eval_time_ns: dict
    solve_time_histogram: dict

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            if isinstance(v, dict):
                return {str(k): clean(x) for k, x in v.items()}
            return v
        return json.dumps(clean(asdict(self)), indent=2, sort_keys=True)


def estimate_pose(true_pose: Pose2, cfg: ScenarioConfig, t: float) -> EstimatedPose:
    est = EstimatedPose.from_pose(true_pose)
    for fault in cfg.faults:
        est = apply_odometry_fault(est, fault, t)
    return est


def evaluate_barrier(points_body, est: EstimatedPose, yaw_rate: float,
                     cfg: ScenarioConfig) -> BarrierEvaluation | None:
    """Composite barrier for a body-frame scan; ``None`` when no point is usable.

    Offsets ``R(yaw) p_B`` never involve the position estimate, so the
    result is bit-identical under any translation of ``est``.
    """
    offsets = body_offsets(points_body, est.yaw)
    try:
        if cfg.filter.mode == "baseline_circle":
            return baseline_from_offsets(offsets, cfg.filter.s_d, cfg.composite)
        Q = shape_matrix_world(cfg.ellipsoid, est.yaw)
        Q_dot = shape_matrix_rate(cfg.ellipsoid, est.yaw, yaw_rate)
        return composite_from_offsets(offsets, Q, Q_dot, cfg.composite)
    except EmptyScan:
        return None


class _Mission:
    """Goal/yaw reference bookkeeping owned by the loop."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.m = cfg.mission
        self.index = 0
        self.ref_pos: np.ndarray | None = None
        self.ref_yaw: float | None = None
        self.last_plan_t = -math.inf
        self.yaw_cmd = cfg.start.yaw

    def final_goal(self) -> np.ndarray | None:
        if self.m.goal_source == "waypoints":
            return np.asarray(self.m.waypoints[-1], dtype=float)
        return None

    def update(self, t: float, est: EstimatedPose, points_body) -> np.ndarray:
        if self.m.goal_source == "waypoints":
            wps = self.m.waypoints
            while (self.index < len(wps) - 1
                   and np.hypot(*(np.asarray(wps[self.index]) - est.position)) < self.m.reach_threshold):
                self.index += 1
            goal = np.asarray(wps[self.index], dtype=float)
        else:
            goal = self._plan(t, est, points_body)
        self._update_yaw(goal, est)
        return goal

    def _plan(self, t, est, points_body) -> np.ndarray:
        pc = self.cfg.planner
        due = (self.ref_pos is None
               or np.hypot(*(self.ref_pos - est.position)) < pc.goal_reach_threshold
               or t - self.last_plan_t >= pc.replan_period - 1e-9)
        if due and len(points_body):
            try:
                ref = plan_horizon(body_to_world(points_body, est), est, pc, self.m.horizon)[0]
            except (EmptyScan, DegenerateDirection) as exc:
                log.debug("t=%.2f planner kept last reference: %s", t, exc)
            else:
                self.ref_pos, self.ref_yaw, self.last_plan_t = ref.position, ref.yaw, t
        if self.ref_pos is None:
            self.ref_pos = np.array(est.position)
        return self.ref_pos

    def _update_yaw(self, goal, est):
        if self.m.yaw_mode == "fixed":
            self.yaw_cmd = self.m.fixed_yaw
        elif self.m.yaw_mode == "planner":
            if self.ref_yaw is not None:
                self.yaw_cmd = self.ref_yaw
        else:
            d = goal - est.position
            if math.hypot(d[0], d[1]) > self.m.heading_min_distance:
                self.yaw_cmd = math.atan2(d[1], d[0])


def run_scenario(cfg: ScenarioConfig) -> tuple[list[TickRecord], RunSummary]:
    dt = cfg.dt
    state = RobotState(cfg.start)
    mission = _Mission(cfg)
    records: list[TickRecord] = []
    for k in range(cfg.n_ticks):
        t = k * dt
        pose = state.true_pose
        est = estimate_pose(pose, cfg, t)
        scan = raycast_scan(cfg.world, pose, t, cfg.lidar, rng_seed=(cfg.seed, k))
        goal = mission.update(t, est, scan.points_body)
        omega = yaw_rate_command(est.yaw, mission.yaw_cmd, cfg.yaw_gain, cfg.omega_max)
        u_nom = nominal_velocity(goal, est.position, cfg.nominal)

        t0 = time.perf_counter_ns()
        ev = evaluate_barrier(scan.points_body, est, omega, cfg)
        out = solve_safety_qp(u_nom, ev, cfg.filter)
        eval_ns = time.perf_counter_ns() - t0

        _, pen = collision_check(cfg.world, pose, cfg.ellipsoid, t)
        records.append(_record(t, pose, est, goal, out, pen, cfg, eval_ns))

        yaw_err = pose.yaw - est.yaw
        u_apply = out.u_star if yaw_err == 0.0 else rotation_matrix(yaw_err) @ out.u_star
        state = step_dynamics(state, u_apply, mission.yaw_cmd + yaw_err, dt, cfg.omega_max, cfg.yaw_gain)
    return records, summarize(records, cfg)


def _record(t, pose, est, goal, out: FilterOutput, pen, cfg, eval_ns) -> TickRecord:
    return TickRecord(
        t=t,
        true_x=float(pose.position[0]), true_y=float(pose.position[1]), true_yaw=pose.yaw,
        est_x=float(est.position[0]), est_y=float(est.position[1]), est_yaw=est.yaw,
        goal_x=float(goal[0]), goal_y=float(goal[1]),
        u_nom_x=float(out.u_nom[0]), u_nom_y=float(out.u_nom[1]),
        u_star_x=float(out.u_star[0]), u_star_y=float(out.u_star[1]),
        H=out.H, min_h=out.min_h, n_constraints=out.n_constraints,
        constraint_active=out.constraint_active, infeasible=out.infeasible,
        collision=pen > cfg.metrics.collision_tolerance, penetration=pen,
        solve_time_ns=out.solve_time, eval_time_ns=eval_ns,
    )


# --- metrics -----------------------------------------------------------------

def goal_distances(records) -> np.ndarray:
    return np.array([math.hypot(r.goal_x - r.est_x, r.goal_y - r.est_y) for r in records])


def deadlock_detector(records, window: float, epsilon: float, reach_threshold: float = 0.3) -> bool:
    """True if, over some trailing window with a fixed goal, goal distance
    shrank by less than ``epsilon`` while the goal stayed unreached."""
    n = len(records)
    if n < 2:
        return False
    t = np.array([r.t for r in records])
    goals = np.array([(r.goal_x, r.goal_y) for r in records])
    dist = goal_distances(records)
    changed = np.concatenate([[False], np.any(goals[1:] != goals[:-1], axis=1)])
    last_change = np.maximum.accumulate(np.where(changed, np.arange(n), 0))
    # i = last tick at least `window` before j
    start = np.searchsorted(t, t - window + 1e-9, side="right") - 1
    for j in range(n):
        i = start[j]
        if i < 0 or last_change[j] > i:
            continue
        if dist[j] > reach_threshold and dist[i] - dist[j] < epsilon:
            return True
    return False


def _timing_stats(values) -> dict:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"mean": 0.0, "p99": 0.0, "max": 0.0, "count": 0}
    return {"mean": float(v.mean()), "p99": float(np.percentile(v, 99)), "max": float(v.max()),
            "count": int(v.size)}


def solve_time_histogram(records, bucket: int = 100) -> dict[int, dict]:
    """Solve-time mean/std grouped by constraint count in buckets of ``bucket``."""
    groups: dict[int, list[float]] = {}
    for r in records:
        groups.setdefault(r.n_constraints // bucket * bucket, []).append(r.solve_time_ns)
    out = {}
    for key in sorted(groups):
        v = np.asarray(groups[key], dtype=float)
        out[key] = {"count": int(v.size), "mean": float(v.mean()), "std": float(v.std())}
    return out


def summarize(records: list[TickRecord], cfg: ScenarioConfig) -> RunSummary:
    mh = np.array([r.min_h for r in records], dtype=float)
    finite = mh[np.isfinite(mh)]
    xy = np.array([(r.true_x, r.true_y) for r in records])
    path = float(np.sum(np.linalg.norm(np.diff(xy, axis=0), axis=1))) if len(records) > 1 else 0.0

    reached_t = None
    mission = _Mission(cfg)
    final = mission.final_goal()
    if final is not None:
        for r in records:
            if math.hypot(final[0] - r.est_x, final[1] - r.est_y) < cfg.mission.reach_threshold:
                reached_t = r.t
                break
    active = [r for r in records if r.n_constraints > 0]
    m = cfg.metrics
    return RunSummary(
        name=cfg.name,
        n_ticks=len(records),
        duration=cfg.duration,
        min_min_h=float(finite.min()) if finite.size else math.inf,
        max_penetration=max((r.penetration for r in records), default=0.0),
        collision_ticks=sum(r.collision for r in records),
        deadlock=deadlock_detector(records, m.deadlock_window, m.deadlock_epsilon, cfg.mission.reach_threshold),
        goal_reached=reached_t is not None,
        goal_reached_time=reached_t,
        total_distance=path,
        constraint_active_fraction=float(np.mean([r.constraint_active for r in records])) if records else 0.0,
        infeasible_ticks=sum(r.infeasible for r in records),
        max_constraints=max((r.n_constraints for r in records), default=0),
        solve_time_ns=_timing_stats([r.solve_time_ns for r in active]),
        eval_time_ns=_timing_stats([r.eval_time_ns for r in active]),
        solve_time_histogram=solve_time_histogram(active, m.solve_time_bucket),
    )


# --- log I/O -------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_ticks_csv(records, path, timing: bool = False) -> Path:
    """One row per tick. Timing columns are opt-in so default logs replay byte-for-byte."""
    path = Path(path)
    cols = TICK_COLUMNS + (TIMING_COLUMNS if timing else ())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in cols])
    return path


def read_ticks_csv(path) -> dict[str, np.ndarray]:
    """Column-wise float arrays from a tick log."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: no tick rows")
    header = rows[0]
    missing = [c for c in ("t", "true_x", "true_y") if c not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    try:
        data = np.array([[float(x) for x in row] for row in rows[1:]])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    return {name: data[:, i] for i, name in enumerate(header)}


def write_summary(summary: RunSummary, path) -> Path:
    path = Path(path)
    path.write_text(summary.to_json() + "\n")
    return path


def deviation_from_nominal(records, u_max: float) -> np.ndarray:
    """``||u* - clamp(u_nom)||`` per tick."""
    return np.array([
        np.hypot(*(np.array([r.u_star_x, r.u_star_y]) - clamp_box([r.u_nom_x, r.u_nom_y], u_max)))
        for r in records
    ])
