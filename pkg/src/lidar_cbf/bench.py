"""Latency benchmark for barrier evaluation and the QP solve on corridor-like scans."""

from __future__ import annotations

import gc
import json
import math
import os
import time
from dataclasses import asdict, dataclass

import numpy as np

from .barrier import CompositeParams, composite_from_offsets
from .core import SafetyEllipsoid, shape_matrix_rate, shape_matrix_world
from .filter import FilterConfig, constraint_pair, solve_box_halfspace
from .sim import ray_ranges

MIN_REPETITIONS = 100


@dataclass(frozen=True)
class BenchInstance:
    offsets: np.ndarray  # world-aligned scan offsets, (n, 2)
    yaw: float
    yaw_rate: float
    u_nom: np.ndarray


@dataclass
class BenchResult:
    n_points: int
    repetitions: int
    barrier_ns: dict
    qp_ns: dict
    total_ns: dict
    active_fraction: float


def _corridor_segments(half_width: float, length: float) -> np.ndarray:
    return np.array([
        [[-length, -half_width], [length, -half_width]],
        [[-length, half_width], [length, half_width]],
    ])


def make_bench_instances(n_points: int, repetitions: int, seed: int = 0, *, corridor_width: float = 2.0,
                         max_range: float = 3.5, noise_std: float = 0.005) -> list[BenchInstance]:
    """Seeded scans of two parallel walls holding exactly ``n_points`` returns each.

    Beams are spread uniformly over the angles that hit a wall within
    ``max_range``, so the constraint count is controlled while keeping the
    geometry of a robot driving down a corridor.
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    rng = np.random.default_rng(seed)
    half = corridor_width / 2.0
    segs = _corridor_segments(half, 10.0 * max_range)
    out = []
    for _ in range(repetitions):
        y0 = rng.uniform(-0.3, 0.3) * half
        origin = np.array([0.0, y0])
        # angular windows that reach each wall: |angle from the normal| <= acos(dist / max_range)
        windows = []
        for dist, normal in ((half - y0, math.pi / 2), (half + y0, -math.pi / 2)):
            spread = math.acos(min(1.0, dist / max_range))
            windows.append((normal - spread, 2 * spread))
        total = sum(w for _, w in windows)
        phase = rng.uniform(0.0, 1.0)
        s = (np.arange(n_points) + phase) / n_points * total
        first = s < windows[0][1]
        angles = np.where(first, windows[0][0] + s, windows[1][0] + (s - windows[0][1]))
        dirs = np.column_stack([np.cos(angles), np.sin(angles)])
        r = ray_ranges(origin, dirs, segs, max_range + 1e-9)
        r = np.where(np.isfinite(r), r, max_range)
        r = r + rng.normal(0.0, noise_std, n_points)
        offsets = dirs * r[:, None]
        u_nom = rng.uniform(-2.0, 2.0, 2)
        out.append(BenchInstance(offsets, float(rng.uniform(-math.pi, math.pi)),
                                 float(rng.uniform(-1.0, 1.0)), u_nom))
    return out


def _stats(ns) -> dict:
    v = np.asarray(ns, dtype=float)
    return {"mean": float(v.mean()), "p99": float(np.percentile(v, 99)), "max": float(v.max())}


def pin_to_one_cpu() -> None:
    """Restrict this process to a single CPU where the platform allows it."""
    if hasattr(os, "sched_setaffinity"):
        cpus = sorted(os.sched_getaffinity(0))
        if cpus:
            os.sched_setaffinity(0, {cpus[0]})


def run_bench(n_points: int, repetitions: int = 1000, seed: int = 0,
              ellipsoid: SafetyEllipsoid = SafetyEllipsoid(0.9, 0.6),
              params: CompositeParams = CompositeParams(),
              filter_cfg: FilterConfig = FilterConfig()) -> BenchResult:
    if repetitions < MIN_REPETITIONS:
        raise ValueError(f"repetitions must be >= {MIN_REPETITIONS}")
    instances = make_bench_instances(n_points, repetitions, seed)
    barrier_ns, qp_ns, total_ns = [], [], []
    active = 0
    umax = filter_cfg.u_max
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for inst in instances:
            t0 = time.perf_counter_ns()
            Q = shape_matrix_world(ellipsoid, inst.yaw)
            Q_dot = shape_matrix_rate(ellipsoid, inst.yaw, inst.yaw_rate)
            ev = composite_from_offsets(inst.offsets, Q, Q_dot, params)
            g, b = constraint_pair(ev, filter_cfg)
            gx, gy, ux, uy = float(g[0]), float(g[1]), float(inst.u_nom[0]), float(inst.u_nom[1])
            t1 = time.perf_counter_ns()
            res = solve_box_halfspace(ux, uy, gx, gy, b, umax)
            t2 = time.perf_counter_ns()
            barrier_ns.append(t1 - t0)
            qp_ns.append(t2 - t1)
            total_ns.append(t2 - t0)
            active += res[2]
    finally:
        if gc_was_enabled:
            gc.enable()
    return BenchResult(n_points, repetitions, _stats(barrier_ns), _stats(qp_ns), _stats(total_ns),
                       active / repetitions)


def bench_report(results: list[BenchResult]) -> dict:
    return {"results": [asdict(r) for r in results]}


def format_table(results: list[BenchResult]) -> str:
    head = f"{'n':>6} {'reps':>6} {'qp mean':>10} {'qp p99':>10} {'qp max':>10} " \
           f"{'eval mean':>11} {'total mean':>11} {'active':>7}"
    lines = [head, "-" * len(head)]
    for r in results:
        lines.append(f"{r.n_points:>6} {r.repetitions:>6} {r.qp_ns['mean']:>10.0f} {r.qp_ns['p99']:>10.0f} "
                     f"{r.qp_ns['max']:>10.0f} {r.barrier_ns['mean']:>11.0f} {r.total_ns['mean']:>11.0f} "
                     f"{r.active_fraction:>7.2f}")
    lines.append("(times in ns)")
    return "\n".join(lines)


def dumps(results: list[BenchResult]) -> str:
    return json.dumps(bench_report(results), indent=2)
