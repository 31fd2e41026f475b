"""Run the headline scenarios and render their SVG figures into results/figures.

    python3 scripts/make_figures.py
"""

import argparse
from pathlib import Path

from lidar_cbf.config import load_scenario
from lidar_cbf.plots import PlotSpec, render
from lidar_cbf.runner import run_scenario, write_ticks_csv

ROOT = Path(__file__).resolve().parents[1]
FIGURES = {
    "scenario1_ellipse": ("trajectory", "barrier_values"),
    "scenario1_baseline": ("trajectory", "barrier_values"),
    "scenario2_odometry_jump": ("trajectory", "velocities", "barrier_values"),
    "scenario3_dynamic_obstacles": ("trajectory", "velocities", "barrier_values", "solver_time"),
    "inspection_planner": ("trajectory",),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(ROOT / "results" / "figures"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, kinds in FIGURES.items():
        scenario = ROOT / "scenarios" / f"{name}.toml"
        cfg = load_scenario(scenario)
        records, _ = run_scenario(cfg)
        log = write_ticks_csv(records, out / f"{name}.csv", timing=True)
        for kind in kinds:
            path = render(PlotSpec(log, kind, out / f"{name}_{kind}.svg", scenario, cfg.filter.u_max))
            print(path)


if __name__ == "__main__":
    main()
