"""Nominal go-to-goal controller and the CBF quadratic-program safety filter.

The filter solves

    min ||u - u_nom||^2   s.t.  |u_j| <= u_max,   g^T u >= b

with ``g = dH/dp`` and ``b = -alpha * H - dH/dt``. One halfspace and a
2D box admit an exact solution: either the clamped nominal command is
feasible, or the halfspace is active and the optimum is the projection
of ``u_nom`` onto the line ``g^T u = b`` restricted to the box.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .barrier import BarrierEvaluation, CompositeParams, EmptyScan, reject_self_hits, softmin_compose

Mode = Literal["composite_ellipse", "baseline_circle", "none"]
MODES = ("composite_ellipse", "baseline_circle", "none")
DEGENERATE_GRAD = 1e-12


@dataclass(frozen=True)
class FilterConfig:
    alpha_gain: float = 2.0
    u_max: float = 1.0
    mode: Mode = "composite_ellipse"
    s_d: float = 0.8

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown filter mode {self.mode!r}")
        if not self.alpha_gain > 0:
            raise ValueError("alpha_gain must be positive")
        if not self.u_max > 0:
            raise ValueError("u_max must be positive")
        if self.mode == "baseline_circle" and not self.s_d > 0:
            raise ValueError("s_d must be positive in baseline mode")


@dataclass(frozen=True)
class NominalConfig:
    kp: tuple[float, float] = (4.0, 4.0)

    def __post_init__(self):
        if len(self.kp) != 2 or min(self.kp) <= 0:
            raise ValueError(f"kp must hold two positive gains, got {self.kp}")


@dataclass(frozen=True)
class FilterOutput:
    u_star: np.ndarray
    u_nom: np.ndarray
    H: float
    min_h: float
    constraint_active: bool
    infeasible: bool
    solve_time: int  # ns, QP only
    n_constraints: int
    g: np.ndarray
    b: float


def nominal_velocity(goal, est_pos, cfg: NominalConfig) -> np.ndarray:
    err = np.asarray(goal, dtype=float) - np.asarray(est_pos, dtype=float)
    return np.array([cfg.kp[0] * err[0], cfg.kp[1] * err[1]])


def clamp_box(u, u_max: float) -> np.ndarray:
    return np.clip(np.asarray(u, dtype=float), -u_max, u_max)


def constraint_pair(ev: BarrierEvaluation, cfg: FilterConfig) -> tuple[np.ndarray, float]:
    """Halfspace ``g^T u >= b`` encoding the CBF condition with linear alpha."""
    return ev.grad_p, -cfg.alpha_gain * ev.H - ev.dH_dt


def _clip(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def solve_box_halfspace(ux: float, uy: float, gx: float, gy: float, b: float, umax: float):
    """Exact minimizer of ``||u - u_nom||^2`` over the box and ``g^T u >= b``.

    Returns ``(x, y, active, infeasible)``. When the halfspace misses the
    box entirely, the box vertex maximizing ``g^T u`` is returned.
    """
    cx = _clip(ux, -umax, umax)
    cy = _clip(uy, -umax, umax)
    if gx * cx + gy * cy >= b:
        return cx, cy, False, False
    gg = gx * gx + gy * gy
    if gg < DEGENERATE_GRAD * DEGENERATE_GRAD:
        if b <= 0.0:
            return cx, cy, False, False
        return cx, cy, True, True

    # line g^T u = b parametrized as u0 + s * t, t = (-gy, gx)
    x0 = gx * b / gg
    y0 = gy * b / gg
    lo, hi = -math.inf, math.inf
    for p0, t in ((x0, -gy), (y0, gx)):
        if t > 0.0:
            lo = max(lo, (-umax - p0) / t)
            hi = min(hi, (umax - p0) / t)
        elif t < 0.0:
            lo = max(lo, (umax - p0) / t)
            hi = min(hi, (-umax - p0) / t)
        elif abs(p0) > umax:
            lo, hi = 1.0, 0.0
    if lo > hi:
        vx = math.copysign(umax, gx) if gx != 0.0 else cx
        vy = math.copysign(umax, gy) if gy != 0.0 else cy
        return vx, vy, True, True
    s = _clip((-gy * (ux - x0) + gx * (uy - y0)) / gg, lo, hi)
    x = _clip(x0 - s * gy, -umax, umax)
    y = _clip(y0 + s * gx, -umax, umax)
    return x, y, True, False


def solve_safety_qp(u_nom, ev: BarrierEvaluation | None, cfg: FilterConfig) -> FilterOutput:
    """Minimally invasive filtered velocity for the current composite barrier.

    ``ev=None`` means an empty scan: no constraint, the clamped nominal
    command passes through.
    """
    u_nom = np.asarray(u_nom, dtype=float)
    umax = cfg.u_max
    if ev is None:
        return FilterOutput(clamp_box(u_nom, umax), u_nom, math.inf, math.inf,
                            False, False, 0, 0, np.zeros(2), -math.inf)
    g, b = constraint_pair(ev, cfg)
    gx, gy = float(g[0]), float(g[1])
    ux, uy = float(u_nom[0]), float(u_nom[1])
    if cfg.mode == "none":
        t0 = time.perf_counter_ns()
        x, y = _clip(ux, -umax, umax), _clip(uy, -umax, umax)
        active = infeasible = False
        elapsed = time.perf_counter_ns() - t0
    else:
        t0 = time.perf_counter_ns()
        x, y, active, infeasible = solve_box_halfspace(ux, uy, gx, gy, b, umax)
        elapsed = time.perf_counter_ns() - t0
    return FilterOutput(np.array([x, y]), u_nom, ev.H, ev.min_h, active, infeasible,
                        elapsed, ev.n_points, np.array([gx, gy]), float(b))


def baseline_from_offsets(offsets, s_d: float, params: CompositeParams | None = None) -> BarrierEvaluation:
    offsets = reject_self_hits(offsets)
    if offsets.shape[0] == 0:
        raise EmptyScan("scan is empty after self-hit rejection")
    params = params or CompositeParams()
    h = np.einsum("ij,ij->i", offsets, offsets) - s_d * s_d
    return softmin_compose(h, -2.0 * offsets, np.zeros_like(h), params)


def baseline_circle_constraints(scan_world, robot_pos, s_d: float,
                                params: CompositeParams | None = None) -> BarrierEvaluation:
    """Distance barriers ``||p_r - p_i||^2 - s_d^2`` composed with the same soft-min."""
    if not s_d > 0:
        raise ValueError("s_d must be positive")
    pts = np.asarray(scan_world, dtype=float).reshape(-1, 2)
    return baseline_from_offsets(pts - np.asarray(robot_pos, dtype=float), s_d, params)
