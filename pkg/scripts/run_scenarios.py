"""Run every shipped scenario, write logs under results/runs, and print a summary table.

    python3 scripts/run_scenarios.py [--out results/runs] [--timing]
"""

import argparse
from pathlib import Path

from lidar_cbf.cli import check_expectations, new_run_dir
from lidar_cbf.config import load_scenario
from lidar_cbf.runner import run_scenario, write_summary, write_ticks_csv

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenarios", default=str(ROOT / "scenarios"))
    ap.add_argument("--out", default=str(ROOT / "results" / "runs"))
    ap.add_argument("--timing", action="store_true")
    args = ap.parse_args()

    header = f"{'scenario':<30} {'min_h':>7} {'pen':>6} {'coll':>5} {'deadlock':>8} {'goal':>5} {'t_goal':>7} expect"
    print(header)
    print("-" * len(header))
    for path in sorted(Path(args.scenarios).glob("*.toml")):
        cfg = load_scenario(path)
        records, s = run_scenario(cfg)
        run_dir = new_run_dir(Path(args.out), cfg.name)
        write_ticks_csv(records, run_dir / "ticks.csv", timing=args.timing)
        write_summary(s, run_dir / "summary.json")
        problems = check_expectations(s, cfg.expect)
        t_goal = f"{s.goal_reached_time:.1f}" if s.goal_reached_time is not None else "-"
        print(f"{cfg.name:<30} {s.min_min_h:>7.3f} {s.max_penetration:>6.3f} {s.collision_ticks:>5} "
              f"{str(s.deadlock):>8} {str(s.goal_reached):>5} {t_goal:>7} {'ok' if not problems else problems}")


if __name__ == "__main__":
    main()
