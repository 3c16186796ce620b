"""Print mean and quartiles of the error per cell of a benchmark CSV."""
import argparse

from provalue.harness import read_records, summarize


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv")
    args = parser.parse_args()
    rows = sorted(summarize(read_records(args.csv)),
                  key=lambda r: (r["game"], r["family"], r["sigma"], r["estimator"], r["m"]))
    print(f"{'game':<12}{'family':<15}{'sigma':>8} {'estimator':<14}{'m':>7}{'mean':>11}{'q1':>11}"
          f"{'median':>11}{'q3':>11}{'failed':>7}")
    for r in rows:
        print(f"{r['game']:<12}{r['family']:<15}{r['sigma']:>8.3g} {r['estimator']:<14}{r['m']:>7}"
              f"{r['mean']:>11.3e}{r['q1']:>11.3e}{r['median']:>11.3e}{r['q3']:>11.3e}{r['failures']:>7}")


if __name__ == "__main__":
    main()
