#!/usr/bin/env python3
"""Time detection over growing event counts on several synthetic homes.

Each home contributes a time-ordered prefix of its events per size; the
mean over homes is reported alongside the growth ratio between the largest
and smallest size.

Usage: python scripts/run_benchmark.py --sizes 100,200,300 --homes 14
"""
import argparse
import json
import statistics
import tempfile
from pathlib import Path

from homeconflict.evaluation import bench, prefix_workload
from homeconflict.synth import SynthConfig, generate, write_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,200,300")
    ap.add_argument("--homes", type=int, default=14, help="independent homes (one per simulated day)")
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--method", default="M1", choices=("M1", "M2", "M3", "M4"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", help="write the result as json")
    args = ap.parse_args()
    sizes = [int(x) for x in args.sizes.split(",") if x.strip()]

    cfg = SynthConfig(n_homes=args.homes, n_events=max(sizes), n_injected_conflicts=0, rng_seed=args.seed)
    per_size = {n: [] for n in sizes}
    with tempfile.TemporaryDirectory() as tmp:
        write_dataset(generate(cfg), tmp)
        for k in range(1, args.homes + 1):
            for row in bench(prefix_workload(Path(tmp) / f"home_{k}", method=args.method), sizes, runs=args.runs):
                per_size[row.n_events].append(row.mean_ms)

    rows = [{"n_events": n, "mean_ms": statistics.fmean(v), "max_ms": max(v)} for n, v in per_size.items()]
    for r in rows:
        print(f"{r['n_events']:>6} events  mean {r['mean_ms']:8.2f} ms  worst home {r['max_ms']:8.2f} ms")
    if len(rows) > 1 and rows[0]["mean_ms"] > 0:
        print(f"ratio {rows[-1]['n_events']}/{rows[0]['n_events']}: {rows[-1]['mean_ms'] / rows[0]['mean_ms']:.2f}")
    if args.out:
        Path(args.out).write_text(json.dumps({"method": args.method, "rows": rows}, indent=2) + "\n")


if __name__ == "__main__":
    main()
