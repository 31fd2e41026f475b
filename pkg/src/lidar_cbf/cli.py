"""Command-line entry point: ``run``, ``suite``, ``bench`` and ``plot``.

Exit codes: 0 success, 1 configuration or input error, 2 safety violation
(``run``) or failed expectation (``suite``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import bench as bench_mod
from .config import ConfigError, ScenarioConfig, apply_overrides, load_scenario
from .filter import MODES
from .plots import PLOT_KINDS, PlotError, PlotSpec, render
from .runner import RunSummary, run_scenario, write_summary, write_ticks_csv

EXIT_OK, EXIT_CONFIG, EXIT_UNSAFE = 0, 1, 2

log = logging.getLogger("lidar_cbf")


def _setup_logging() -> None:
    level = os.environ.get("LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def new_run_dir(out_dir: Path, name: str) -> Path:
    """Fresh directory under ``out_dir``; earlier runs are never overwritten."""
    out_dir.mkdir(parents=True, exist_ok=True)
    candidate = out_dir / name
    k = 1
    while candidate.exists():
        candidate = out_dir / f"{name}_{k}"
        k += 1
    candidate.mkdir()
    return candidate


def _load(args) -> ScenarioConfig:
    cfg = load_scenario(args.scenario)
    return apply_overrides(cfg, kappa=args.kappa, gamma=args.gamma, alpha=args.alpha, u_max=args.u_max,
                           mode=args.mode, seed=args.seed, duration=args.duration)


def _execute(cfg: ScenarioConfig, out_dir: Path | None, timing: bool) -> tuple[RunSummary, Path | None]:
    records, summary = run_scenario(cfg)
    run_dir = None
    if out_dir is not None:
        run_dir = new_run_dir(out_dir, cfg.name)
        write_ticks_csv(records, run_dir / "ticks.csv", timing=timing)
        write_summary(summary, run_dir / "summary.json")
    return summary, run_dir


def cmd_run(args) -> int:
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary, run_dir = _execute(cfg, Path(args.out), args.timing)
    print(f"{cfg.name}: min_h={summary.min_min_h:.4f} max_penetration={summary.max_penetration:.4f} "
          f"collisions={summary.collision_ticks} deadlock={summary.deadlock} "
          f"goal_reached={summary.goal_reached} -> {run_dir}")
    if summary.collision_ticks:
        print(f"error: {summary.collision_ticks} collision ticks", file=sys.stderr)
        return EXIT_UNSAFE
    return EXIT_OK


def check_expectations(summary: RunSummary, expect: dict) -> list[str]:
    """Mismatches between a run summary and a scenario's ``[expect]`` table."""
    observed = {
        "collision": summary.collision_ticks > 0,
        "deadlock": summary.deadlock,
        "goal_reached": summary.goal_reached,
    }
    failures = []
    for key, want in expect.items():
        if key == "min_h_at_least":
            if not summary.min_min_h >= float(want):
                failures.append(f"min_h {summary.min_min_h:.4f} < {want}")
        elif key in observed:
            if observed[key] != bool(want):
                failures.append(f"{key}={observed[key]} (expected {bool(want)})")
        else:
            failures.append(f"unknown expectation {key!r}")
    return failures


def cmd_suite(args) -> int:
    paths = sorted(Path(args.directory).glob("*.toml"))
    if not paths:
        print(f"error: no scenarios in {args.directory}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out) if args.out else None
    rows, failed, broken = [], 0, 0
    for path in paths:
        try:
            cfg = load_scenario(path)
        except ConfigError as exc:
            rows.append((path.stem, "ERROR", str(exc)))
            broken += 1
            continue
        summary, _ = _execute(cfg, out_dir, False)
        problems = check_expectations(summary, cfg.expect)
        if summary.collision_ticks and "collision" not in cfg.expect:
            problems.append("collision")
        failed += bool(problems)
        rows.append((cfg.name, "FAIL" if problems else "PASS", "; ".join(problems)))
    width = max(len(r[0]) for r in rows)
    for name, status, note in rows:
        print(f"{name:<{width}}  {status}  {note}".rstrip())
    if broken:
        return EXIT_CONFIG
    return EXIT_UNSAFE if failed else EXIT_OK


def cmd_bench(args) -> int:
    if args.repetitions < bench_mod.MIN_REPETITIONS:
        print(f"error: --repetitions must be >= {bench_mod.MIN_REPETITIONS}", file=sys.stderr)
        return EXIT_CONFIG
    bench_mod.pin_to_one_cpu()
    results = [bench_mod.run_bench(n, args.repetitions, args.seed) for n in args.n]
    print(bench_mod.format_table(results))
    text = bench_mod.dumps(results)
    if args.json:
        Path(args.json).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        spec = PlotSpec(Path(args.log), args.kind, Path(args.out),
                        Path(args.scenario) if args.scenario else None, args.u_max)
        out = render(spec)
    except (PlotError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lidar-cbf", description="LIDAR-based composite CBF safety filter")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write ticks.csv + summary.json")
    run.add_argument("scenario")
    run.add_argument("--out", default="runs", help="parent directory for the run directory")
    run.add_argument("--kappa", type=float)
    run.add_argument("--gamma", type=float)
    run.add_argument("--alpha", type=float)
    run.add_argument("--u-max", type=float)
    run.add_argument("--mode", choices=MODES)
    run.add_argument("--seed", type=int)
    run.add_argument("--duration", type=float)
    run.add_argument("--timing", action="store_true", help="add per-tick timing columns to the CSV")
    run.set_defaults(func=cmd_run)

    suite = sub.add_parser("suite", help="run every scenario in a directory and check [expect] tables")
    suite.add_argument("directory", nargs="?", default="scenarios")
    suite.add_argument("--out", help="also write logs under this directory")
    suite.set_defaults(func=cmd_suite)

    b = sub.add_parser("bench", help="time barrier evaluation and the QP solve")
    b.add_argument("--n", type=int, nargs="+", default=[1, 100, 800, 1300], help="point counts")
    b.add_argument("--repetitions", type=int, default=1000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--json", help="write the JSON report here instead of stdout")
    b.set_defaults(func=cmd_bench)

    plot = sub.add_parser("plot", help="render an SVG from a tick log")
    plot.add_argument("log")
    plot.add_argument("--kind", choices=PLOT_KINDS, required=True)
    plot.add_argument("--out", required=True)
    plot.add_argument("--scenario", help="scenario file, for world segments and ellipse size")
    plot.add_argument("--u-max", type=float, default=1.0)
    plot.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
