"""Ground truth, error metric, benchmark sweeps and the regression error bound."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .estimators import parse_budget, run_estimator
from .games import Game, InteractionGame, LinearGame, TreeGame, load_game, unwrap, with_noise
from .regress import GbtConfig
from .sampling import SizeDistribution, all_members
from .treeprob import MAX_BRUTE_FORCE_PLAYERS, brute_force_values, tree_prob_values
from .weights import WeightVector, log_comb, make_weights

log = logging.getLogger(__name__)

CSV_COLUMNS = ("game", "family", "estimator", "m", "sigma", "run", "error", "evals", "wall_ms")
MAX_BOUND_PLAYERS = 16


def ground_truth(game: Game, w: WeightVector) -> np.ndarray:
    """Exact values: tree engine for tree games, closed forms for linear ones, enumeration otherwise."""
    game = unwrap(game)
    if w.n != game.n:
        raise ValueError(f"weights for n={w.n} but game has n={game.n}")
    if isinstance(game, TreeGame):
        return tree_prob_values(game.ensemble, game.explicand, game.baselines, w)
    if isinstance(game, LinearGame):
        return game.exact_values()
    if isinstance(game, InteractionGame):
        return _interaction_values(game, w)
    if game.n > MAX_BRUTE_FORCE_PLAYERS:
        raise ValueError(f"no exact method for a {type(game).__name__} with n={game.n} > {MAX_BRUTE_FORCE_PLAYERS}")
    return brute_force_values(game, w)


def _interaction_values(game: InteractionGame, w: WeightVector) -> np.ndarray:
    # a term c 1[j in S] 1[k in S] gives j (and k) c * sum_s C(n-2, s-1) p_s
    n = game.n
    phi = game.linear.exact_values().copy()
    if n < 2 or len(game.pair_coeffs) == 0:
        return phi
    s = np.arange(1, n)
    share = float(np.sum(np.exp(log_comb(n - 2, s - 1) + w.log_p[1:])))
    for (j, k), c in zip(game.pairs, game.pair_coeffs):
        phi[j] += c * share
        phi[k] += c * share
    return phi


def normalized_error(estimate, truth) -> float:
    """||estimate - truth||^2 / ||truth||^2."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    denom = float(truth @ truth)
    if denom == 0:
        raise ValueError("normalized error is undefined for an all-zero truth vector")
    diff = estimate - truth
    return float(diff @ diff) / denom


@dataclass
class EstimatorSpec:
    name: str
    label: str
    options: dict

    @classmethod
    def parse(cls, item) -> "EstimatorSpec":
        if isinstance(item, str):
            return cls(item, item, {})
        item = dict(item)
        name = item.pop("name")
        label = item.pop("label", name)
        if isinstance(item.get("gbt"), dict):
            item["gbt"] = GbtConfig(**item["gbt"])
        return cls(name, label, item)


@dataclass
class BenchmarkConfig:
    games: list[dict]
    families: list[str]
    estimators: list[EstimatorSpec]
    budgets: list
    runs: int = 100
    sigmas: list[float] = field(default_factory=lambda: [0.0])
    seed: int = 0
    threads: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not (self.games and self.families and self.estimators and self.budgets):
            raise ValueError("games, families, estimators and budgets must be non-empty")
        for budget in self.budgets:
            parse_budget(budget, 1)  # rejects non-positive or malformed budgets
        if any(s < 0 for s in self.sigmas):
            raise ValueError("noise sigma must be >= 0")

    @classmethod
    def from_json(cls, doc: dict) -> "BenchmarkConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown benchmark config keys: {sorted(unknown)}")
        doc = dict(doc)
        doc["estimators"] = [EstimatorSpec.parse(e) for e in doc.get("estimators", [])]
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "BenchmarkConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class BenchmarkRecord:
    game: str
    family: str
    estimator: str
    m: int
    sigma: float
    run: int
    error: float
    evals: int
    wall_ms: float = field(compare=False)  # timing, not a function of the seeds
    failure: str | None = field(default=None, compare=False)

    def row(self) -> list:
        return [self.game, self.family, self.estimator, self.m, repr(float(self.sigma)), self.run,
                repr(float(self.error)), self.evals, f"{self.wall_ms:.3f}"]


def _stable(text: str) -> int:
    return zlib.crc32(text.encode())


def cell_seed(master: int, game_id: str, family: str, estimator: str, m: int, run: int) -> int:
    """Estimator seed for one run; independent of the noise level so sigma sweeps share samples."""
    cell = _stable(f"{game_id}|{family}|{estimator}|{m}")
    return int(np.random.SeedSequence([master, cell, run]).generate_state(1)[0])


def noise_seed(master: int, game_id: str, run: int) -> int:
    return int(np.random.SeedSequence([master, _stable(f"noise|{game_id}"), run]).generate_state(1)[0])


def run_benchmark(cfg: BenchmarkConfig, out=None) -> list[BenchmarkRecord]:
    """Execute the full cross product; failing runs become NaN-error rows."""
    out = out if out is not None else cfg.out
    handle = None
    if out is not None:
        handle = open(out, "w", newline="")  # fail early on an unwritable path
    games = []
    for idx, doc in enumerate(cfg.games):
        doc = dict(doc)
        gid = str(doc.pop("id", f"game{idx}"))
        games.append((gid, load_game(doc)))

    truths = {}
    for gid, game in games:
        for fam in cfg.families:
            truths[gid, fam] = ground_truth(game, make_weights(fam, game.n))

    tasks = []
    for gid, game in games:
        for fam in cfg.families:
            w = make_weights(fam, game.n)
            for spec in cfg.estimators:
                for budget in cfg.budgets:
                    m = parse_budget(budget, game.n)
                    for sigma in cfg.sigmas:
                        for run in range(cfg.runs):
                            tasks.append((gid, game, fam, w, spec, m, sigma, run))

    def execute(task):
        gid, game, fam, w, spec, m, sigma, run = task
        seed = cell_seed(cfg.seed, gid, fam, spec.label, m, run)
        noisy = with_noise(game, sigma, noise_seed(cfg.seed, gid, run)) if sigma > 0 else game
        start = time.perf_counter()
        try:
            report = run_estimator(spec.name, noisy, w, m, seed, **spec.options)
            err = normalized_error(report.estimates, truths[gid, fam])
            return BenchmarkRecord(gid, fam, spec.label, m, sigma, run, err, report.evaluations_used,
                                   report.wall_time * 1000)
        except Exception as exc:  # a single bad cell must not abort the sweep
            log.warning("run failed (%s, %s, %s, m=%d, run=%d): %s", gid, fam, spec.label, m, run, exc)
            return BenchmarkRecord(gid, fam, spec.label, m, sigma, run, math.nan, 0,
                                   (time.perf_counter() - start) * 1000, failure=str(exc))

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            records = list(pool.map(execute, tasks))
    else:
        records = [execute(t) for t in tasks]

    if handle is not None:
        with handle:
            write_records(handle, records)
    return records


def write_records(handle, records) -> None:
    writer = csv.writer(handle)
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.row())


def read_records(path) -> list[BenchmarkRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [
            BenchmarkRecord(r["game"], r["family"], r["estimator"], int(r["m"]), float(r["sigma"]), int(r["run"]),
                            float(r["error"]), int(r["evals"]), float(r["wall_ms"]))
            for r in reader
        ]


def summarize(records) -> list[dict]:
    """Mean and quartiles of the error per (game, family, estimator, m, sigma) cell."""
    cells: dict[tuple, list[float]] = {}
    for r in records:
        cells.setdefault((r.game, r.family, r.estimator, r.m, r.sigma), []).append(r.error)
    out = []
    for key, errs in cells.items():
        errs = np.asarray(errs)
        ok = errs[np.isfinite(errs)]
        q = np.quantile(ok, [0.25, 0.5, 0.75]) if ok.size else [math.nan] * 3
        out.append(dict(zip(("game", "family", "estimator", "m", "sigma"), key),
                        mean=float(ok.mean()) if ok.size else math.nan,
                        q1=float(q[0]), median=float(q[1]), q3=float(q[2]), failures=int(errs.size - ok.size)))
    return out


@dataclass
class BoundReport:
    rhs: float
    realized: float | None
    m: int
    delta: float
    k: int
    epsilon: float
    weighted_residuals: list[float]
    worst_fold: int

    def holds(self) -> bool:
        return self.realized is not None and self.realized <= self.rhs


def weighted_residual_sum(game: Game, w: WeightVector, dist: SizeDistribution, f) -> float:
    """sum_S [v(S) - f(S)]^2 (p_{s-1}^2 s + p_s^2 (n - s)) / D(S) by enumeration."""
    n = game.n
    members = all_members(n)
    sizes = members.sum(axis=1)
    resid = np.asarray(game.evaluate_batch(members)) - f.predict(members)
    mix = w.p_padded[sizes] ** 2 * sizes + w.p_padded[sizes + 1] ** 2 * (n - sizes)
    num = resid**2 * mix
    with np.errstate(divide="ignore"):
        log_d = dist.log_density(sizes)
    live = num > 0
    if np.any(live & np.isneginf(log_d)):
        return math.inf
    return float(np.sum(num[live] * np.exp(-log_d[live])))


def error_bound_report(game: Game, w: WeightVector, dist: SizeDistribution, fitted, m: int, delta: float,
                         k: int | None = None, estimates=None) -> BoundReport:
    """High-probability error bound (k^2 / (m delta)) * max over folds of the weighted residual sum.

    ``fitted`` is one learned function or the list of per-fold functions;
    ``k`` defaults to their count. If ``estimates`` is given, the realized
    squared error against exact values is reported alongside.
    """
    if game.n > MAX_BOUND_PLAYERS:
        raise ValueError(f"bound enumeration supports n <= {MAX_BOUND_PLAYERS}, got {game.n}")
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    fits = list(fitted) if isinstance(fitted, (list, tuple)) else [fitted]
    k = len(fits) if k is None else k
    sums = [weighted_residual_sum(game, w, dist, f) for f in fits]
    worst = int(np.argmax(sums))
    rhs = k * k / (m * delta) * sums[worst]
    realized = None
    if estimates is not None:
        diff = np.asarray(estimates, dtype=float) - ground_truth(game, w)
        realized = float(diff @ diff)
    return BoundReport(rhs, realized, m, delta, k, k * k * game.n / (m * delta), sums, worst)


theorem_bound_report = error_bound_report  # name used by the published interface
