"""``provalue`` command line: exact values, single estimates, sweeps, weights, self-test.

Exit status: 0 on success, 1 on usage errors, 2 on runtime errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .estimators import ESTIMATORS, linear_msr, monte_carlo, msr, parse_budget, run_estimator
from .games import load_game
from .harness import BenchmarkConfig, ground_truth, run_benchmark, write_records
from .regress import GbtConfig
from .treeprob import brute_force_values, tree_prob_values
from .weights import make_weights

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master random seed (default 0)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads for bench (default 1)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="provalue", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("exact", parents=[common], help="exact values of a game")
    p.add_argument("--game", required=True, help="game config JSON")
    p.add_argument("--weights", required=True, help="shapley | banzhaf | beta:A,B | wbanzhaf:Q")
    p.add_argument("--out")

    p = sub.add_parser("estimate", parents=[common], help="run one estimator")
    p.add_argument("--game", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--estimator", required=True, choices=sorted(ESTIMATORS))
    p.add_argument("--budget", required=True, help="evaluations: an integer or a multiple like 40n")
    p.add_argument("--k", type=int, default=10, help="folds for regression estimators")
    p.add_argument("--practical", action="store_true", help="single fit on all samples")
    p.add_argument("--without-replacement", action="store_true")
    p.add_argument("--rounds", type=int, default=GbtConfig.rounds)
    p.add_argument("--max-depth", type=int, default=GbtConfig.max_depth)
    p.add_argument("--learning-rate", type=float, default=GbtConfig.learning_rate)
    p.add_argument("--out")

    p = sub.add_parser("bench", parents=[common], help="run a benchmark sweep to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    p = sub.add_parser("weights", parents=[common], help="print the weight vector p_0..p_{n-1}")
    p.add_argument("--family", required=True)
    p.add_argument("--n", type=int, required=True)

    sub.add_parser("validate", parents=[common], help="self-test on the bundled fixtures")
    return parser


def _emit(doc, out):
    text = json.dumps(doc)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load_game(path):
    return load_game(json.loads(Path(path).read_text()))


def _cmd_exact(args):
    game = _load_game(args.game)
    phi = ground_truth(game, make_weights(args.weights, game.n))
    _emit([float(x) for x in phi], args.out)


def _cmd_estimate(args):
    game = _load_game(args.game)
    w = make_weights(args.weights, game.n)
    m = parse_budget(args.budget, game.n)
    gbt = GbtConfig(rounds=args.rounds, max_depth=args.max_depth, learning_rate=args.learning_rate)
    report = run_estimator(args.estimator, game, w, m, getattr(args, "seed", 0), k=args.k,
                           practical=args.practical, replacement=not args.without_replacement, gbt=gbt)
    _emit(report.to_json(), args.out)


def _cmd_bench(args):
    cfg = BenchmarkConfig.load(args.config)
    if hasattr(args, "seed"):
        cfg.seed = args.seed
    cfg.threads = getattr(args, "threads", 1)
    out = args.out or cfg.out
    records = run_benchmark(cfg, out=out)
    if out is None:
        write_records(sys.stdout, records)


def _cmd_weights(args):
    if args.n < 1:
        raise UsageError("provalue weights: error: --n must be >= 1")
    w = make_weights(args.family, args.n)
    print(json.dumps([round(float(x), 10) for x in w.p]))


def fixture_path(name: str):
    return resources.files("provalue") / "fixtures" / f"{name}.json"


def validate() -> list[tuple[str, bool, float]]:
    """Oracle-equivalence checks on the bundled fixtures: (check, passed, max abs deviation)."""
    checks = []

    def record(name, got, want, tol=1e-9):
        dev = float(np.max(np.abs(np.asarray(got, dtype=float) - np.asarray(want, dtype=float))))
        checks.append((name, dev <= tol, dev))

    families = ["shapley", "banzhaf", "beta:2,2", "beta:1,4", "wbanzhaf:0.7"]
    stump_doc = json.loads(fixture_path("stump").read_text())
    stump = load_game(stump_doc)
    for fam in families:
        w = make_weights(fam, stump.n)
        record(f"stump {fam} tree engine", ground_truth(stump, w), stump_doc["expected"]["any"])
        record(f"stump {fam} enumeration", brute_force_values(stump, w), stump_doc["expected"]["any"])

    pair_doc = json.loads(fixture_path("two_player").read_text())
    pair = load_game(pair_doc)
    w = make_weights("shapley", 2)
    want = pair_doc["expected"]["shapley"]
    record("two_player enumeration", brute_force_values(pair, w), want)
    record("two_player exhaustive msr", msr(pair, w, 0, exhaustive=True).estimates, want)
    record("two_player exhaustive monte carlo", monte_carlo(pair, w, 0, exhaustive=True).estimates, want)

    forest = load_game(json.loads(fixture_path("forest").read_text()))
    for fam in families:
        w = make_weights(fam, forest.n)
        exact = brute_force_values(forest, w)
        for engine in ("compiled", "python"):
            got = tree_prob_values(forest.ensemble, forest.explicand, forest.baselines, w, engine=engine)
            record(f"forest {fam} tree engine ({engine})", got, exact)
    w = make_weights("shapley", forest.n)
    full = forest(np.ones(forest.n, dtype=bool)) - forest(np.zeros(forest.n, dtype=bool))
    record("forest shapley efficiency", [ground_truth(forest, w).sum()], [full])
    report = linear_msr(forest, make_weights("banzhaf", forest.n), 80, seed=0)
    checks.append(("forest linear_msr budget", report.evaluations_used <= 80, float(report.evaluations_used)))
    return checks


def _cmd_validate(args):
    checks = validate()
    for name, ok, dev in checks:
        print(f"{'ok  ' if ok else 'FAIL'} {name} ({dev:.2e})")
    failed = sum(not ok for _, ok, _ in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    if failed:
        raise RuntimeError(f"{failed} validation checks failed")


COMMANDS = {"exact": _cmd_exact, "estimate": _cmd_estimate, "bench": _cmd_bench, "weights": _cmd_weights,
            "validate": _cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return USAGE_ERROR
        if getattr(args, "threads", 1) < 1:
            raise UsageError("provalue: error: --threads must be >= 1")
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:
        print(f"provalue: {type(exc).__name__}: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
