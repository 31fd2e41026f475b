"""Planar frames, poses, scans and safety-ellipse geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# planar skew generator: dR/dt = omega * SKEW @ R
SKEW = np.array([[0.0, -1.0], [1.0, 0.0]])


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]; in-range values are returned unchanged."""
    if -math.pi < angle <= math.pi:
        return angle
    if not math.isfinite(angle):
        raise ValueError(f"non-finite angle {angle}")
    wrapped = math.remainder(angle, 2 * math.pi)
    return math.pi if wrapped <= -math.pi else wrapped


def _frozen_vec(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(2)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Pose2:
    position: np.ndarray
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen_vec(self.position))
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))


@dataclass(frozen=True)
class EstimatedPose(Pose2):
    """Odometry estimate consumed by the planner, nominal controller and filter."""

    @classmethod
    def from_pose(cls, pose: Pose2) -> "EstimatedPose":
        return cls(pose.position, pose.yaw)


@dataclass(frozen=True)
class RobotState:
    true_pose: Pose2
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    yaw_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "linear_velocity", _frozen_vec(self.linear_velocity))
        if not np.all(np.isfinite(self.linear_velocity)):
            raise ValueError("linear velocity must be finite")


@dataclass(frozen=True)
class Scan:
    """One LIDAR frame, points expressed in the body frame."""

    points_body: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        pts = np.array(self.points_body, dtype=float).reshape(-1, 2)
        pts.setflags(write=False)
        object.__setattr__(self, "points_body", pts)

    def __len__(self) -> int:
        return self.points_body.shape[0]


@dataclass(frozen=True)
class SafetyEllipsoid:
    """Body-frame safety envelope. ``a_z`` is carried but unused in planar runs."""

    a_x: float
    a_y: float
    a_z: float | None = None

    def __post_init__(self):
        if not (self.a_x > 0 and self.a_y > 0):
            raise ValueError(f"semi-axes must be positive, got ({self.a_x}, {self.a_y})")
        if self.a_z is not None and not self.a_z > 0:
            raise ValueError(f"a_z must be positive, got {self.a_z}")

    @property
    def semi_axes(self) -> tuple[float, float]:
        return (self.a_x, self.a_y)

    def body_shape(self) -> np.ndarray:
        return np.diag([1.0 / self.a_x**2, 1.0 / self.a_y**2])


def rotation_matrix(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


def shape_matrix_world(e: SafetyEllipsoid, yaw: float) -> np.ndarray:
    """World-frame shape matrix ``R diag(1/a^2) R^T``."""
    R = rotation_matrix(yaw)
    Q = R @ e.body_shape() @ R.T
    # exact symmetry; the product above can differ in the last ulp
    return 0.5 * (Q + Q.T)


def shape_matrix_rate(e: SafetyEllipsoid, yaw: float, yaw_rate: float) -> np.ndarray:
    """Time derivative of :func:`shape_matrix_world` for a body turning at ``yaw_rate``.

    With ``dR/dt = yaw_rate * SKEW @ R`` the derivative is
    ``yaw_rate * (SKEW @ Q - Q @ SKEW)``.
    """
    Q = shape_matrix_world(e, yaw)
    Qdot = yaw_rate * (SKEW @ Q - Q @ SKEW)
    return 0.5 * (Qdot + Qdot.T)


def body_to_world(points_body, pose: Pose2) -> np.ndarray:
    pts = np.asarray(points_body, dtype=float).reshape(-1, 2)
    return pose.position + pts @ rotation_matrix(pose.yaw).T


def world_to_body(points_world, pose: Pose2) -> np.ndarray:
    pts = np.asarray(points_world, dtype=float).reshape(-1, 2)
    return (pts - pose.position) @ rotation_matrix(pose.yaw)


def body_offsets(points_body, yaw: float) -> np.ndarray:
    """World-aligned offsets ``R(yaw) p_B`` of body points from the robot center.

    Equal to ``body_to_world(p, pose) - pose.position`` mathematically, but
    computed without touching the position so the result is bit-identical
    under any translation of the pose estimate.
    """
    pts = np.asarray(points_body, dtype=float).reshape(-1, 2)
    return pts @ rotation_matrix(yaw).T
