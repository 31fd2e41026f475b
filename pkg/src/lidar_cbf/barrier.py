"""Per-point time-varying ellipse barriers and their soft-min composite.

Each LIDAR point ``p_i`` contributes ``h_i = d_i^T Q(t) d_i - 1`` with
``d_i = p_i - p_r``. The composite barrier is

    H = -(gamma / kappa) * log(sum_i exp(-kappa * tanh(h_i / gamma)))

and its partials are softmax-weighted sums of the per-point partials,
each scaled by ``sech^2(h_i / gamma)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SELF_HIT_RADIUS = 0.01


class EmptyScan(ValueError):
    """No usable points: the caller should treat the scan as unconstrained."""


@dataclass(frozen=True)
class CompositeParams:
    kappa: float = 8.0
    gamma: float = 0.9

    def __post_init__(self):
        if not (self.kappa > 0 and self.gamma > 0):
            raise ValueError(f"kappa and gamma must be positive, got {self.kappa}, {self.gamma}")


@dataclass(frozen=True)
class BarrierEvaluation:
    H: float
    grad_p: np.ndarray
    dH_dt: float
    min_h: float
    n_points: int
    weights_sum: float


def h_point(p_world, robot_pos, Q) -> float:
    d = np.asarray(p_world, dtype=float) - np.asarray(robot_pos, dtype=float)
    return float(d @ Q @ d - 1.0)


def h_point_gradients(p_world, robot_pos, Q, Q_dot) -> tuple[np.ndarray, float]:
    """Partials of :func:`h_point` w.r.t. the robot position and time."""
    d = np.asarray(p_world, dtype=float) - np.asarray(robot_pos, dtype=float)
    return -2.0 * (Q @ d), float(d @ Q_dot @ d)


def point_barriers(offsets: np.ndarray, Q: np.ndarray, Q_dot: np.ndarray | None = None):
    """Vectorized ``h_i``, ``dh_i/dp`` (N x 2) and ``dh_i/dt`` for offsets ``d_i = p_i - p_r``."""
    dQ = offsets @ Q
    h = np.einsum("ij,ij->i", dQ, offsets) - 1.0
    grad = -2.0 * dQ
    if Q_dot is None:
        dh_dt = np.zeros_like(h)
    else:
        dh_dt = np.einsum("ij,ij->i", offsets @ Q_dot, offsets)
    return h, grad, dh_dt


def _sech2(x: np.ndarray) -> np.ndarray:
    # 4 e^{-2|x|} / (1 + e^{-2|x|})^2, no overflow for large |x|
    e = np.exp(-2.0 * np.abs(x))
    return 4.0 * e / (1.0 + e) ** 2


def softmin_weights(h, params: CompositeParams) -> np.ndarray:
    """Softmax of ``-kappa * tanh(h / gamma)`` computed with max-shift."""
    z = -params.kappa * np.tanh(np.asarray(h, dtype=float) / params.gamma)
    w = np.exp(z - z.max())
    return w / w.sum()


def softmin_compose(h, grad_h, dh_dt, params: CompositeParams) -> BarrierEvaluation:
    """Aggregate per-point barrier values and partials into the composite."""
    h = np.asarray(h, dtype=float)
    if h.size == 0:
        raise EmptyScan("no points to compose")
    x = h / params.gamma
    z = -params.kappa * np.tanh(x)
    m = z.max()
    w = np.exp(z - m)
    s = w.sum()
    lam = w / s
    H = -(params.gamma / params.kappa) * (m + np.log(s))
    scale = lam * _sech2(x)
    return BarrierEvaluation(
        H=float(H),
        grad_p=scale @ np.asarray(grad_h, dtype=float),
        dH_dt=float(scale @ np.asarray(dh_dt, dtype=float)),
        min_h=float(h.min()),
        n_points=int(h.size),
        weights_sum=float(lam.sum()),
    )


def reject_self_hits(offsets: np.ndarray, radius: float = SELF_HIT_RADIUS) -> np.ndarray:
    offsets = np.asarray(offsets, dtype=float).reshape(-1, 2)
    keep = np.einsum("ij,ij->i", offsets, offsets) >= radius * radius
    return offsets[keep]


def composite_from_offsets(offsets, Q, Q_dot, params: CompositeParams,
                           self_hit_radius: float = SELF_HIT_RADIUS) -> BarrierEvaluation:
    offsets = reject_self_hits(offsets, self_hit_radius)
    if offsets.shape[0] == 0:
        raise EmptyScan("scan is empty after self-hit rejection")
    h, grad, dh_dt = point_barriers(offsets, Q, Q_dot)
    return softmin_compose(h, grad, dh_dt, params)


def composite_evaluate(scan_world, robot_pos, Q, Q_dot, params: CompositeParams) -> BarrierEvaluation:
    """Composite barrier of a world-frame scan around ``robot_pos``.

    Raises:
        EmptyScan: if no point survives self-hit rejection.
    """
    pts = np.asarray(scan_world, dtype=float).reshape(-1, 2)
    return composite_from_offsets(pts - np.asarray(robot_pos, dtype=float), Q, Q_dot, params)
