"""Deterministic planar world: segment obstacles, ray-cast LIDAR, kinematics, faults."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import EstimatedPose, Pose2, RobotState, SafetyEllipsoid, Scan, rotation_matrix, wrap_angle

_PARALLEL_EPS = 1e-12


def _as_segments(segments) -> np.ndarray:
    segs = np.array(segments, dtype=float).reshape(-1, 2, 2)
    segs.setflags(write=False)
    return segs


@dataclass(frozen=True)
class DynamicObstacle:
    """Rigid segment set following a piecewise-linear (x, y, theta) schedule.

    Before the first and after the last waypoint the obstacle holds its pose.
    """

    segments_local: np.ndarray
    times: np.ndarray
    poses: np.ndarray  # (T, 3): x, y, theta [rad]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "segments_local", _as_segments(self.segments_local))
        times = np.array(self.times, dtype=float).reshape(-1)
        poses = np.array(self.poses, dtype=float).reshape(-1, 3)
        if times.size == 0 or times.size != poses.shape[0]:
            raise ValueError("trajectory needs one pose per timestamp")
        if np.any(np.diff(times) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "poses", poses)

    def pose_at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.poses[:, k]) for k in range(3)])

    def segments_at(self, t: float) -> np.ndarray:
        x, y, theta = self.pose_at(t)
        R = rotation_matrix(theta)
        return self.segments_local @ R.T + np.array([x, y])


@dataclass(frozen=True)
class World:
    static_segments: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 2)))
    dynamic_obstacles: tuple[DynamicObstacle, ...] = ()

    def __post_init__(self):
        segs = _as_segments(self.static_segments)
        lengths = np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1)
        if np.any(lengths <= 0):
            raise ValueError("segments must have nonzero length")
        object.__setattr__(self, "static_segments", segs)
        object.__setattr__(self, "dynamic_obstacles", tuple(self.dynamic_obstacles))

    def segments_at(self, t: float) -> np.ndarray:
        if not self.dynamic_obstacles:
            return self.static_segments
        parts = [self.static_segments] + [ob.segments_at(t) for ob in self.dynamic_obstacles]
        return np.concatenate(parts, axis=0)


@dataclass(frozen=True)
class LidarConfig:
    n_beams: int = 720
    max_range: float = 3.5
    angular_span: float = 2 * math.pi
    range_noise_std: float = 0.0

    def __post_init__(self):
        if self.n_beams < 1:
            raise ValueError("n_beams must be >= 1")
        if not self.max_range > 0:
            raise ValueError("max_range must be positive")

    def beam_angles(self) -> np.ndarray:
        """Body-frame beam angles; a full circle excludes the duplicate endpoint."""
        if self.n_beams == 1:
            return np.zeros(1)
        if self.angular_span >= 2 * math.pi - 1e-12:
            return -math.pi + 2 * math.pi * np.arange(self.n_beams) / self.n_beams
        half = self.angular_span / 2
        return np.linspace(-half, half, self.n_beams)


@dataclass(frozen=True)
class OdometryFault:
    trigger_time: float
    position_offset: tuple[float, float] = (0.0, 0.0)
    yaw_offset: float = 0.0
    drift_rate: tuple[float, float] = (0.0, 0.0)  # m/s, accumulates after the jump


def ray_ranges(origin, directions: np.ndarray, segments: np.ndarray, max_range: float) -> np.ndarray:
    """First-hit range per ray, ``inf`` for misses beyond ``max_range``."""
    n = directions.shape[0]
    if segments.shape[0] == 0:
        return np.full(n, np.inf)
    a = segments[:, 0] - np.asarray(origin, dtype=float)  # (M, 2)
    e = segments[:, 1] - segments[:, 0]
    dx, dy = directions[:, 0:1], directions[:, 1:2]  # (N, 1)
    denom = dx * e[:, 1] - dy * e[:, 0]  # d x e, (N, M)
    a_cross_e = a[:, 0] * e[:, 1] - a[:, 1] * e[:, 0]  # (M,)
    a_cross_d = a[:, 0] * dy - a[:, 1] * dx  # (N, M)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = a_cross_e / denom
        s = a_cross_d / denom
    ok = (np.abs(denom) > _PARALLEL_EPS) & (r >= 0.0) & (s >= 0.0) & (s <= 1.0) & (r <= max_range)
    r = np.where(ok, r, np.inf)
    return r.min(axis=1)


def raycast_scan(world: World, true_pose: Pose2, t: float, cfg: LidarConfig, rng_seed=0) -> Scan:
    """Simulated scan from ``true_pose``; misses are dropped, points in body frame."""
    angles = cfg.beam_angles()
    world_angles = angles + true_pose.yaw
    dirs = np.column_stack([np.cos(world_angles), np.sin(world_angles)])
    ranges = ray_ranges(true_pose.position, dirs, world.segments_at(t), cfg.max_range)
    hit = np.isfinite(ranges)
    r = ranges[hit]
    if cfg.range_noise_std > 0 and r.size:
        rng = np.random.default_rng(rng_seed)
        r = np.clip(r + rng.normal(0.0, cfg.range_noise_std, r.size), 0.0, cfg.max_range)
    a = angles[hit]
    return Scan(np.column_stack([r * np.cos(a), r * np.sin(a)]), float(t))


def yaw_rate_command(yaw: float, yaw_cmd: float, yaw_gain: float, omega_max: float) -> float:
    omega = yaw_gain * wrap_angle(yaw_cmd - yaw)
    return max(-omega_max, min(omega_max, omega))


def step_dynamics(state: RobotState, u_star, yaw_cmd: float, dt: float, omega_max: float,
                  yaw_gain: float = 2.0) -> RobotState:
    """Explicit Euler step of ``p' = u`` and a rate-limited proportional yaw loop."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    u = np.asarray(u_star, dtype=float)
    pose = state.true_pose
    omega = yaw_rate_command(pose.yaw, yaw_cmd, yaw_gain, omega_max)
    new_pose = Pose2(pose.position + u * dt, pose.yaw + omega * dt)
    return RobotState(new_pose, u, omega)


def apply_odometry_fault(est: EstimatedPose, fault: OdometryFault, t: float) -> EstimatedPose:
    """Corrupt a fault-free estimate with a constant offset from ``trigger_time`` on.

    ``est`` is the estimate the robot would have without this fault, so the
    corrupted estimate keeps integrating the same increments as the truth.
    """
    if t < fault.trigger_time:
        return est
    offset = np.asarray(fault.position_offset, dtype=float)
    drift = np.asarray(fault.drift_rate, dtype=float)
    if np.any(drift):
        offset = offset + drift * (t - fault.trigger_time)
    return EstimatedPose(est.position + offset, est.yaw + fault.yaw_offset)


def collision_check(world: World, true_pose: Pose2, ellipsoid: SafetyEllipsoid, t: float = 0.0):
    """Ground-truth audit of the safety ellipse against every world segment.

    Returns ``(intersects, penetration)`` with penetration ``max(0, 1 - q_min)``
    and ``q_min`` the smallest quadratic-form value over all segment points,
    found exactly by scaling the ellipse to the unit circle.
    """
    segs = world.segments_at(t)
    if segs.shape[0] == 0:
        return False, 0.0
    R = rotation_matrix(true_pose.yaw)
    scale = np.array([1.0 / ellipsoid.a_x, 1.0 / ellipsoid.a_y])
    a = ((segs[:, 0] - true_pose.position) @ R) * scale
    b = ((segs[:, 1] - true_pose.position) @ R) * scale
    e = b - a
    ee = np.einsum("ij,ij->i", e, e)
    s = np.clip(-np.einsum("ij,ij->i", a, e) / ee, 0.0, 1.0)
    closest = a + s[:, None] * e
    q_min = float(np.einsum("ij,ij->i", closest, closest).min())
    return q_min < 1.0, max(0.0, 1.0 - q_min)
