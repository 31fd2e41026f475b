"""Latency sweep over constraint counts; writes results/bench.json.

    python3 scripts/bench_latency.py [--repetitions 2000]
"""

import argparse
from pathlib import Path

from lidar_cbf.bench import dumps, format_table, pin_to_one_cpu, run_bench

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[1, 50, 100, 200, 400, 800, 1000, 1300, 2000])
    ap.add_argument("--repetitions", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=str(ROOT / "results" / "bench.json"))
    args = ap.parse_args()

    pin_to_one_cpu()
    results = [run_bench(n, args.repetitions, args.seed) for n in args.n]
    print(format_table(results))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dumps(results) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
