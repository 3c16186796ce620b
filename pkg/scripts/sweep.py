"""Run a benchmark config (sample-size or noise sweep) and print the summary table.

    python scripts/sweep.py scripts/configs/sample_size.json --out sample_size.csv
    python scripts/sweep.py scripts/configs/noise.json --out noise.csv --runs 5
"""
import argparse
import logging
import time

from provalue.harness import BenchmarkConfig, run_benchmark, summarize


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config")
    parser.add_argument("--out", required=True)
    parser.add_argument("--runs", type=int, help="override runs per cell")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")

    cfg = BenchmarkConfig.load(args.config)
    if args.runs:
        cfg.runs = args.runs
    cfg.threads = args.threads
    start = time.perf_counter()
    records = run_benchmark(cfg, out=args.out)
    print(f"{len(records)} rows -> {args.out} in {time.perf_counter() - start:.1f}s")
    for r in sorted(summarize(records), key=lambda r: (r["game"], r["family"], r["sigma"], r["estimator"], r["m"])):
        print(f"{r['game']:<10} {r['family']:<13} sigma={r['sigma']:<6g} {r['estimator']:<12} m={r['m']:<6} "
              f"mean={r['mean']:.3e} median={r['median']:.3e}")


if __name__ == "__main__":
    main()
