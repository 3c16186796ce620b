"""How often the realized squared error of regression MSR exceeds the enumerated high-probability bound."""
import argparse

from provalue.estimators import RegressionMsrConfig, regression_msr
from provalue.games import random_game
from provalue.harness import error_bound_report
from provalue.sampling import default_msr_distribution
from provalue.weights import make_weights


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=8)
    parser.add_argument("--family", default="shapley")
    parser.add_argument("--budget", type=int, default=80)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--delta", type=float, default=0.1)
    parser.add_argument("--runs", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=9, help="game seed")
    args = parser.parse_args()

    game = random_game("forest", args.n, seed=args.seed)
    w = make_weights(args.family, args.n)
    dist = default_msr_distribution(w)
    cfg = RegressionMsrConfig(k=args.k, distribution=dist)
    misses, ratios = 0, []
    for s in range(args.runs):
        est = regression_msr(game, w, args.budget, cfg, seed=s)
        rep = error_bound_report(game, w, dist, est.fits, args.budget, args.delta, estimates=est.estimates)
        misses += not rep.holds()
        ratios.append(rep.realized / rep.rhs if rep.rhs > 0 else float("inf"))
    ratios.sort()
    print(f"bound exceeded in {misses}/{args.runs} runs (delta={args.delta}); "
          f"realized/bound median {ratios[len(ratios) // 2]:.3g}, max {ratios[-1]:.3g}")


if __name__ == "__main__":
    main()
