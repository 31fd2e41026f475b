"""Reactive local inspection view planner (planar).

The next view keeps ``d_view`` from the nearest observed surface point and
slides sideways by the horizontal-overlap footprint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .barrier import EmptyScan
from .core import EstimatedPose, wrap_angle


class DegenerateDirection(ValueError):
    pass


@dataclass(frozen=True)
class PlannerConfig:
    d_view: float = 1.5
    gamma_H: float = 0.5
    gamma_V: float = 0.5  # stored only; vertical overlap is not used in 2D
    fov_h: float = math.radians(69.4)
    fov_v: float = math.radians(45.0)  # stored only
    goal_reach_threshold: float = 0.3
    replan_period: float = 1.0
    sweep_left: bool = True

    def __post_init__(self):
        if not self.d_view > 0:
            raise ValueError("d_view must be positive")
        if not 0.0 <= self.gamma_H <= 1.0:
            raise ValueError("gamma_H must lie in [0, 1]")
        if not 0.0 < self.fov_h < math.pi:
            raise ValueError("fov_h must lie in (0, pi)")


@dataclass(frozen=True)
class ViewReference:
    position: np.ndarray
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(2))
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))


def nearest_surface_point(scan_world, est_pos) -> np.ndarray:
    """Closest scan point to ``est_pos``; ties go to the lowest index."""
    pts = np.asarray(scan_world, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise EmptyScan("no surface points")
    diff = pts - np.asarray(est_pos, dtype=float)
    # argmin returns the first occurrence on ties
    return pts[int(np.argmin(np.einsum("ij,ij->i", diff, diff)))].copy()


def view_offsets(dist: float, cfg: PlannerConfig) -> tuple[float, float]:
    """Approach distance and horizontal-overlap step for a surface at ``dist``."""
    d_insp = dist - cfg.d_view
    footprint = 2.0 * math.tan(cfg.fov_h / 2.0) * dist
    d_hov = footprint - footprint * cfg.gamma_H
    return d_insp, d_hov


def next_view_reference(scan_world, est_pose: EstimatedPose, cfg: PlannerConfig) -> ViewReference:
    p_r = np.asarray(est_pose.position, dtype=float)
    p_nn = nearest_surface_point(scan_world, p_r)
    delta = p_nn - p_r
    dist = math.hypot(delta[0], delta[1])
    if dist <= 1e-6:
        raise DegenerateDirection(f"nearest point {dist:.2e} m from the robot")
    nu_x = delta / dist
    # planar nu_up x nu_x: rotate +90 deg (or -90 for the opposite sweep)
    nu_y = np.array([-nu_x[1], nu_x[0]]) if cfg.sweep_left else np.array([nu_x[1], -nu_x[0]])
    d_insp, d_hov = view_offsets(dist, cfg)
    return ViewReference(p_r + nu_x * d_insp + nu_y * d_hov, math.atan2(nu_x[1], nu_x[0]))


def plan_horizon(scan_world, est_pose: EstimatedPose, cfg: PlannerConfig, horizon: int) -> list[ViewReference]:
    """Recursively roll the view update forward over a frozen scan."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    path = []
    pose = est_pose
    for _ in range(horizon):
        ref = next_view_reference(scan_world, pose, cfg)
        path.append(ref)
        pose = EstimatedPose(ref.position, ref.yaw)
    return path
