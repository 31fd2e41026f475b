"""Static SVG figures rendered from tick logs, without a plotting dependency.

Layouts:

* ``velocities``: u_nom x/y (clamped to the box) and u* x/y against time.
* ``barrier_values``: composite H and min h_i against time, with the zero line.
* ``trajectory``: world segments, robot ellipse snapshots along the true
  path, nominal (magenta) and filtered (purple) velocity arrows.
* ``solver_time``: QP solve time per tick against constraint count;
  needs a log written with timing columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PLOT_KINDS = ("velocities", "barrier_values", "trajectory", "solver_time")

NOMINAL_COLOR = "#d000d0"  # magenta
FILTERED_COLOR = "#6a0dad"  # purple
SERIES_COLORS = ("#d000d0", "#f08ce0", "#6a0dad", "#3b82f6")

WIDTH, HEIGHT = 800, 420
MARGIN = (60, 20, 30, 45)  # left, right, top, bottom


class PlotError(ValueError):
    pass


@dataclass(frozen=True)
class PlotSpec:
    log_path: Path
    kind: str
    out_path: Path
    scenario_path: Path | None = None
    u_max: float = 1.0
    snapshot_every: float = 1.0

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise PlotError(f"plot kind must be one of {PLOT_KINDS}, got {self.kind!r}")


class _Canvas:
    def __init__(self, xlim, ylim, title: str, xlabel: str, ylabel: str, equal_aspect: bool = False):
        self.items: list[str] = []
        left, right, top, bottom = MARGIN
        self.px0, self.px1 = left, WIDTH - right
        self.py0, self.py1 = top, HEIGHT - bottom
        x0, x1 = _pad(*xlim)
        y0, y1 = _pad(*ylim)
        if equal_aspect:
            sx = (self.px1 - self.px0) / (x1 - x0)
            sy = (self.py1 - self.py0) / (y1 - y0)
            s = min(sx, sy)
            cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
            hw = (self.px1 - self.px0) / s / 2
            hh = (self.py1 - self.py0) / s / 2
            x0, x1, y0, y1 = cx - hw, cx + hw, cy - hh, cy + hh
        self.xlim, self.ylim = (x0, x1), (y0, y1)
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel

    def X(self, x):
        x0, x1 = self.xlim
        return self.px0 + (np.asarray(x, dtype=float) - x0) / (x1 - x0) * (self.px1 - self.px0)

    def Y(self, y):
        y0, y1 = self.ylim
        return self.py1 - (np.asarray(y, dtype=float) - y0) / (y1 - y0) * (self.py1 - self.py0)

    def scale(self) -> float:
        return (self.px1 - self.px0) / (self.xlim[1] - self.xlim[0])

    def polyline(self, x, y, color, name, width=1.5, dash=None):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(self.X(x[ok]), self.Y(y[ok])))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline data-name="{escape(name)}" fill="none" stroke="{color}" '
                          f'stroke-width="{width}"{extra} points="{pts}"/>')

    def line(self, x0, y0, x1, y1, color, width=1.0, cls=None):
        c = f' class="{cls}"' if cls else ""
        self.items.append(f'<line{c} x1="{self.X(x0):.2f}" y1="{self.Y(y0):.2f}" x2="{self.X(x1):.2f}" '
                          f'y2="{self.Y(y1):.2f}" stroke="{color}" stroke-width="{width}"/>')

    def arrow(self, x, y, dx, dy, color, cls):
        self.items.append(f'<line class="{cls}" x1="{self.X(x):.2f}" y1="{self.Y(y):.2f}" '
                          f'x2="{self.X(x + dx):.2f}" y2="{self.Y(y + dy):.2f}" stroke="{color}" '
                          f'stroke-width="1.5" marker-end="url(#head-{cls})"/>')

    def ellipse(self, cx, cy, ax, ay, yaw):
        s = self.scale()
        self.items.append(f'<ellipse class="robot" cx="{self.X(cx):.2f}" cy="{self.Y(cy):.2f}" '
                          f'rx="{ax * s:.2f}" ry="{ay * s:.2f}" fill="none" stroke="#888" stroke-width="0.8" '
                          f'transform="rotate({-math.degrees(yaw):.2f} {self.X(cx):.2f} {self.Y(cy):.2f})"/>')

    def points(self, x, y, color, name, r=1.2):
        circles = "".join(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="{r}"/>' for a, b in zip(self.X(x), self.Y(y)))
        self.items.append(f'<g data-name="{escape(name)}" fill="{color}">{circles}</g>')

    def legend(self, entries):
        for k, (label, color) in enumerate(entries):
            y = self.py0 + 14 + 16 * k
            self.items.append(f'<line x1="{self.px1 - 150}" y1="{y - 4}" x2="{self.px1 - 130}" y2="{y - 4}" '
                              f'stroke="{color}" stroke-width="2"/>'
                              f'<text x="{self.px1 - 125}" y="{y}" font-size="11">{escape(label)}</text>')

    def render(self) -> str:
        frame = [
            f'<rect x="{self.px0}" y="{self.py0}" width="{self.px1 - self.px0}" height="{self.py1 - self.py0}" '
            f'fill="none" stroke="#000" stroke-width="0.8"/>',
            f'<text x="{WIDTH / 2}" y="{self.py0 - 10}" text-anchor="middle" font-size="13">{escape(self.title)}</text>',
            f'<text x="{(self.px0 + self.px1) / 2}" y="{HEIGHT - 8}" text-anchor="middle" '
            f'font-size="11">{escape(self.xlabel)}</text>',
            f'<text x="14" y="{(self.py0 + self.py1) / 2}" text-anchor="middle" font-size="11" '
            f'transform="rotate(-90 14 {(self.py0 + self.py1) / 2})">{escape(self.ylabel)}</text>',
        ]
        for v in _ticks(*self.xlim):
            frame.append(f'<text x="{self.X(v):.2f}" y="{self.py1 + 14}" text-anchor="middle" '
                         f'font-size="10">{v:g}</text>')
        for v in _ticks(*self.ylim):
            frame.append(f'<text x="{self.px0 - 4}" y="{self.Y(v) + 3:.2f}" text-anchor="end" '
                         f'font-size="10">{v:g}</text>')
        defs = "".join(
            f'<marker id="head-{cls}" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto">'
            f'<path d="M0,0 L6,3 L0,6 z" fill="{color}"/></marker>'
            for cls, color in (("u_nom", NOMINAL_COLOR), ("u_star", FILTERED_COLOR)))
        clip = (f'<clipPath id="plot-area"><rect x="{self.px0}" y="{self.py0}" width="{self.px1 - self.px0}" '
                f'height="{self.py1 - self.py0}"/></clipPath>')
        body = "\n".join(self.items)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
                f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">\n'
                f'<defs>{defs}{clip}</defs>\n<rect width="100%" height="100%" fill="#fff"/>\n'
                + "\n".join(frame) + f'\n<g clip-path="url(#plot-area)">\n{body}\n</g>\n</svg>\n')


def _pad(lo: float, hi: float) -> tuple[float, float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return (0.0, 1.0)
    if hi - lo < 1e-9:
        return (lo - 0.5, hi + 0.5)
    span = hi - lo
    return (lo - 0.05 * span, hi + 0.05 * span)


def _ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    return [round(start + k * step, 10) for k in range(int((hi - start) / step) + 1)]


def _finite_range(*arrays) -> tuple[float, float]:
    v = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays])
    v = v[np.isfinite(v)]
    return (float(v.min()), float(v.max())) if v.size else (0.0, 1.0)


def _require(log: dict, cols) -> None:
    missing = [c for c in cols if c not in log]
    if missing:
        raise PlotError(f"log lacks columns {missing}")


def velocities_svg(log: dict, u_max: float = 1.0) -> str:
    _require(log, ("t", "u_nom_x", "u_nom_y", "u_star_x", "u_star_y"))
    t = log["t"]
    ux, uy = np.clip(log["u_nom_x"], -u_max, u_max), np.clip(log["u_nom_y"], -u_max, u_max)
    series = [("u_nom_x", ux), ("u_nom_y", uy), ("u_star_x", log["u_star_x"]), ("u_star_y", log["u_star_y"])]
    c = _Canvas(_finite_range(t), _finite_range(*(s for _, s in series)), "Control velocities",
                "time [s]", "velocity [m/s]")
    for (name, s), color in zip(series, SERIES_COLORS):
        c.polyline(t, s, color, name, dash="5,3" if name.startswith("u_nom") else None)
    c.legend([(n, col) for (n, _), col in zip(series, SERIES_COLORS)])
    return c.render()


def barrier_values_svg(log: dict) -> str:
    _require(log, ("t", "H", "min_h"))
    t = log["t"]
    c = _Canvas(_finite_range(t), _finite_range(log["H"], log["min_h"], [0.0]), "Barrier values",
                "time [s]", "value")
    c.line(c.xlim[0], 0.0, c.xlim[1], 0.0, "#aaa", 0.8, cls="zero")
    c.polyline(t, log["H"], NOMINAL_COLOR, "H")
    c.polyline(t, log["min_h"], FILTERED_COLOR, "min_h")
    c.legend([("composite H", NOMINAL_COLOR), ("min h_i", FILTERED_COLOR)])
    return c.render()


def trajectory_svg(log: dict, segments: np.ndarray | None = None, semi_axes=(0.9, 0.45),
                   snapshot_every: float = 1.0, u_max: float = 1.0, arrow_scale: float = 0.8) -> str:
    _require(log, ("t", "true_x", "true_y", "true_yaw", "u_nom_x", "u_nom_y", "u_star_x", "u_star_y"))
    x, y = log["true_x"], log["true_y"]
    segs = np.zeros((0, 2, 2)) if segments is None else np.asarray(segments, dtype=float).reshape(-1, 2, 2)
    ax, ay = semi_axes
    xs = [x - ax, x + ax] + ([segs[..., 0]] if segs.size else [])
    ys = [y - ax, y + ax] + ([segs[..., 1]] if segs.size else [])
    c = _Canvas(_finite_range(*xs), _finite_range(*ys), "Trajectory", "x [m]", "y [m]", equal_aspect=True)
    for s in segs:
        c.line(s[0, 0], s[0, 1], s[1, 0], s[1, 1], "#000", 2.0, cls="wall")
    c.polyline(x, y, "#555", "path", width=1.0)
    t = log["t"]
    next_t = -math.inf
    for k in range(len(t)):
        if t[k] + 1e-9 < next_t:
            continue
        next_t = t[k] + snapshot_every
        c.ellipse(x[k], y[k], ax, ay, log["true_yaw"][k])
        un = np.clip([log["u_nom_x"][k], log["u_nom_y"][k]], -u_max, u_max) * arrow_scale
        us = np.array([log["u_star_x"][k], log["u_star_y"][k]]) * arrow_scale
        # arrows are drawn in the world frame from the true position
        c.arrow(x[k], y[k], un[0], un[1], NOMINAL_COLOR, "u_nom")
        c.arrow(x[k], y[k], us[0], us[1], FILTERED_COLOR, "u_star")
    c.legend([("u_nom", NOMINAL_COLOR), ("u*", FILTERED_COLOR)])
    return c.render()


def solver_time_svg(log: dict, bucket: int = 100) -> str:
    if "solve_time_ns" not in log:
        raise PlotError("log has no timing columns; rerun with --timing")
    _require(log, ("n_constraints",))
    n = log["n_constraints"]
    keep = n > 0
    n, st = n[keep], log["solve_time_ns"][keep] / 1000.0
    if n.size == 0:
        raise PlotError("no ticks with constraints")
    keys = np.floor(n / bucket) * bucket
    centers, means, stds = [], [], []
    for k in np.unique(keys):
        v = st[keys == k]
        centers.append(k + bucket / 2)
        means.append(v.mean())
        stds.append(v.std())
    centers, means, stds = map(np.asarray, (centers, means, stds))
    c = _Canvas(_finite_range(n, centers), _finite_range(st, means + stds), "QP solve time",
                "constraints", "solve time [us]")
    c.points(n, st, "#bbb", "samples")
    for cx, m, s in zip(centers, means, stds):
        c.line(cx, m - s, cx, m + s, FILTERED_COLOR, 1.5, cls="std")
    c.polyline(centers, means, FILTERED_COLOR, "mean", width=2.0)
    return c.render()


def render(spec: PlotSpec) -> Path:
    """Write the SVG described by ``spec``; raises ``PlotError`` on unusable logs."""
    from .runner import read_ticks_csv

    try:
        log = read_ticks_csv(spec.log_path)
    except (OSError, ValueError) as exc:
        raise PlotError(str(exc)) from exc
    if spec.kind == "velocities":
        svg = velocities_svg(log, spec.u_max)
    elif spec.kind == "barrier_values":
        svg = barrier_values_svg(log)
    elif spec.kind == "trajectory":
        segments, axes = None, (0.9, 0.45)
        if spec.scenario_path is not None:
            from .config import load_scenario

            cfg = load_scenario(spec.scenario_path)
            t_end = float(log["t"][-1])
            segments = cfg.world.segments_at(t_end)
            axes = cfg.ellipsoid.semi_axes
        svg = trajectory_svg(log, segments, axes, spec.snapshot_every, spec.u_max)
    else:
        svg = solver_time_svg(log)
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    return out
