"""Budgeted estimators of probabilistic values.

Every estimator wraps the game in a fresh ``CountingGame`` so that
``evaluations_used`` counts distinct coalitions and never exceeds the budget.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .games import CountingGame, Game
from .regress import (
    GbtConfig,
    exact_prob_values,
    fit_constrained_linear,
    fit_gbt,
    fit_linear,
    shapley_kernel_log_weights,
)
from .sampling import (
    SizeDistribution,
    ZeroDensityError,
    all_members,
    default_msr_distribution,
    log_densities,
    sample_permutations,
    sample_subsets,
    uniform_members_of_size,
)
from .weights import WeightVector, log_comb, make_weights


class BudgetError(ValueError):
    """The evaluation budget is too small for the estimator."""


@dataclass
class EstimateReport:
    estimates: np.ndarray
    evaluations_used: int
    estimator: str
    config: dict
    seed: object
    wall_time: float
    budget: int | None = None
    fits: list = field(default_factory=list, repr=False, compare=False)

    def to_json(self) -> dict:
        return {
            "estimator": self.estimator,
            "estimates": [float(x) for x in self.estimates],
            "evaluations_used": int(self.evaluations_used),
            "budget": self.budget,
            "seed": self.seed if isinstance(self.seed, (int, type(None))) else str(self.seed),
            "wall_time": self.wall_time,
            "config": self.config,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "EstimateReport":
        return cls(
            estimates=np.asarray(doc["estimates"], dtype=float),
            evaluations_used=int(doc["evaluations_used"]),
            estimator=doc["estimator"],
            config=doc.get("config", {}),
            seed=doc.get("seed"),
            wall_time=float(doc.get("wall_time", 0.0)),
            budget=doc.get("budget"),
        )


def _seed_repr(seed):
    return int(seed) if isinstance(seed, (int, np.integer)) else None


def _report(name, counting, estimates, config, seed, start, budget, fits=()):
    estimates = np.asarray(estimates, dtype=float)
    if budget is not None and counting.calls > budget:
        raise AssertionError(f"{name} used {counting.calls} evaluations with budget {budget}")
    return EstimateReport(estimates, counting.calls, name, config, _seed_repr(seed),
                          time.perf_counter() - start, budget, list(fits))


def _log_pad(w: WeightVector) -> np.ndarray:
    """log p_l for l in -1..n at index l + 1 (-inf outside 0..n-1)."""
    out = np.full(w.n + 2, -np.inf)
    out[1:-1] = w.log_p
    return out


def msr_ratios(w: WeightVector, members: np.ndarray, log_d: np.ndarray) -> np.ndarray:
    """(p_{|S|-1} 1[i in S] - p_{|S|} 1[i not in S]) / D(S), formed from log differences."""
    sizes = members.sum(axis=1)
    lp = _log_pad(w)
    inside = np.exp(lp[sizes] - log_d)[:, None]
    outside = np.exp(lp[sizes + 1] - log_d)[:, None]
    return np.where(members, inside, -outside)


def _player_distribution(w: WeightVector) -> SizeDistribution:
    """Law on subsets of the other n-1 players with D(S) = p_|S|."""
    return SizeDistribution.from_subset_weights(w.n - 1, w.log_p)


def monte_carlo(game: Game, w: WeightVector, m: int, dist: SizeDistribution | None = None, seed=None,
                exhaustive: bool = False, name: str = "monte_carlo") -> EstimateReport:
    """Per-player marginal-contribution sampling, reweighted by p_|S| / D(S).

    ``dist`` is a size distribution over the n-1 other players; the default
    samples each S with probability p_|S|, making every weight 1.
    """
    start = time.perf_counter()
    n = game.n
    counting = CountingGame(game)
    dist = _player_distribution(w) if dist is None else dist
    config = {"m": m, "exhaustive": exhaustive}
    if dist.n != n - 1:
        raise ValueError(f"monte_carlo needs a distribution over {n - 1} players, got {dist.n}")
    if exhaustive:
        others = all_members(n - 1)
        sizes = others.sum(axis=1)
        weights = w.p[sizes]
        phi = np.empty(n)
        for i in range(n):
            without = np.insert(others, i, False, axis=1)
            with_i = without.copy()
            with_i[:, i] = True
            phi[i] = weights @ (counting.evaluate_batch(with_i) - counting.evaluate_batch(without))
        return _report(name, counting, phi, config, seed, start, None)

    pairs = m // (2 * n)
    if pairs < 1:
        raise BudgetError(f"{name} needs m >= 2n = {2 * n}, got {m}")
    rng = np.random.default_rng(seed)
    sizes = rng.choice(n, size=(n, pairs), p=dist.q)
    rows_without = []
    for i in range(n):
        others = uniform_members_of_size(sizes[i], n - 1, rng)
        rows_without.append(np.insert(others, i, False, axis=1))
    without = np.concatenate(rows_without)
    with_i = without.copy()
    player = np.repeat(np.arange(n), pairs)
    with_i[np.arange(n * pairs), player] = True
    values = counting.evaluate_batch(np.concatenate([with_i, without]))
    diff = values[: n * pairs] - values[n * pairs:]
    flat_sizes = sizes.reshape(-1)
    log_d = dist.log_density(flat_sizes)
    if np.any(np.isneginf(log_d)):
        raise ZeroDensityError("sampled a subset with zero density")
    factor = np.exp(w.log_p[flat_sizes] - log_d)
    phi = (diff * factor).reshape(n, pairs).mean(axis=1)
    return _report(name, counting, phi, config, seed, start, m)


def wsl(game: Game, w: WeightVector, m: int, seed=None) -> EstimateReport:
    """Monte Carlo with subsets drawn by Shapley weights (uniform over sizes)."""
    dist = SizeDistribution.uniform_sizes(game.n - 1)
    return monte_carlo(game, w, m, dist, seed, name="wsl")


def permutation_estimator(game: Game, w: WeightVector, m: int, seed=None) -> EstimateReport:
    """Permutation sampling with prefix-size factor r_s = n C(n-1, s) p_s."""
    start = time.perf_counter()
    n = game.n
    counting = CountingGame(game)
    count = m // (n + 1)
    if count < 1:
        raise BudgetError(f"permutation needs m >= n + 1 = {n + 1}, got {m}")
    perms = sample_permutations(n, count, seed)
    position = np.empty_like(perms)
    rows = np.arange(count)[:, None]
    position[rows, perms] = np.arange(n)[None, :]
    prefix = np.arange(n + 1)
    members = position[:, None, :] < prefix[None, :, None]
    values = counting.evaluate_batch(members.reshape(-1, n)).reshape(count, n + 1)
    s = np.arange(n)
    r = np.exp(np.log(n) + log_comb(n - 1, s) + w.log_p)
    contrib = (values[:, 1:] - values[:, :-1]) * r
    phi = np.zeros(n)
    np.add.at(phi, perms.reshape(-1), contrib.reshape(-1))
    return _report("permutation", counting, phi / count, {"m": m, "permutations": count}, seed, start, m)


def msr(game: Game, w: WeightVector, m: int, dist: SizeDistribution | None = None, seed=None,
        replacement: bool = True, exhaustive: bool = False) -> EstimateReport:
    """Maximum sample reuse: every sampled v(S) updates every player."""
    start = time.perf_counter()
    n = game.n
    counting = CountingGame(game)
    config = {"m": m, "replacement": replacement, "exhaustive": exhaustive,
              "distribution": "default" if dist is None else "supplied"}
    if exhaustive:
        members = all_members(n)
        values = counting.evaluate_batch(members)
        sizes = members.sum(axis=1)
        coef = np.where(members, w.p_padded[sizes][:, None], -w.p_padded[sizes + 1][:, None])
        return _report("msr", counting, values @ coef, config, seed, start, None)
    if m < 1:
        raise BudgetError(f"msr needs m >= 1, got {m}")
    dist = default_msr_distribution(w) if dist is None else dist
    batch = sample_subsets(dist, m, replacement, seed)
    log_d = log_densities(dist, batch.members)
    values = counting.evaluate_batch(batch.members)
    phi = (values[:, None] * msr_ratios(w, batch.members, log_d)).mean(axis=0)
    return _report("msr", counting, phi, config, seed, start, m)


def arm(game: Game, w: WeightVector, m: int, seed=None) -> EstimateReport:
    """Two MSR-style batches: sizes weighted by p_{s-1} (players inside) and p_s (outside)."""
    start = time.perf_counter()
    n = game.n
    counting = CountingGame(game)
    if m < 2:
        raise BudgetError(f"arm needs m >= 2, got {m}")
    rng = np.random.default_rng(seed)
    lp = _log_pad(w)
    sizes = np.arange(n + 1)
    log_plus = lp[sizes]        # p_{s-1}
    log_minus = lp[sizes + 1]   # p_s
    z_plus = np.exp(logsumexp(log_comb(n, sizes) + log_plus))
    z_minus = np.exp(logsumexp(log_comb(n, sizes) + log_minus))
    half = m // 2
    batch_a = sample_subsets(SizeDistribution.from_subset_weights(n, log_plus), half, True, rng).members
    batch_b = sample_subsets(SizeDistribution.from_subset_weights(n, log_minus), m - half, True, rng).members
    values = counting.evaluate_batch(np.concatenate([batch_a, batch_b]))
    va, vb = values[:half], values[half:]
    phi = z_plus * (va @ batch_a) / half - z_minus * (vb @ ~batch_b) / (m - half)
    return _report("arm", counting, phi, {"m": m}, seed, start, m)


def _require_shapley(w: WeightVector | None, n: int, name: str):
    if w is None:
        return
    if w.n != n or not is_shapley(w):
        raise ValueError(f"{name} estimates Shapley values only")


def is_shapley(w: WeightVector) -> bool:
    ref = make_weights("shapley", w.n)
    return bool(np.allclose(w.log_p, ref.log_p, rtol=0, atol=1e-10))


def shapley_leverage_scores(n: int) -> np.ndarray:
    """Per-subset leverage of a size-s row in the constrained, kernel-weighted Shapley design.

    With kernel weights k(s), the Gram matrix of the indicator rows is
    a I + b 1 1^T with a = sum_s k(s) C(n-2, s-1). Projecting out the sum
    direction leaves a I, so a row of size s has leverage k(s) s (n-s) / (n a).
    Sizes 0 and n carry no leverage (they are fixed by the constraint).
    """
    s = np.arange(n + 1)
    log_k = shapley_kernel_log_weights(n)
    inner = s[1:n]
    a = np.sum(np.exp(log_k[1:n] + log_comb(n - 2, inner - 1)))
    lev = np.zeros(n + 1)
    lev[1:n] = np.exp(log_k[1:n]) * inner * (n - inner) / (n * a)
    return lev


def _kernel_fit_weights(n: int, members: np.ndarray, log_d: np.ndarray) -> np.ndarray:
    log_k = shapley_kernel_log_weights(n)
    return np.exp(log_k[members.sum(axis=1)] - log_d)


def _regression_shapley(name, game, m, dist, seed, exhaustive, start):
    n = game.n
    if n < 2:
        raise ValueError(f"{name} needs n >= 2")
    counting = CountingGame(game)
    v0 = counting(np.zeros(n, dtype=bool))
    v1 = counting(np.ones(n, dtype=bool))
    if exhaustive:
        members = all_members(n)[1:-1]
        weights = np.exp(shapley_kernel_log_weights(n)[members.sum(axis=1)])
        budget = None
    else:
        if m < n + 2:
            raise BudgetError(f"{name} needs m >= n + 2 = {n + 2}, got {m}")
        members = sample_subsets(dist, m - 2, True, seed).members
        weights = _kernel_fit_weights(n, members, log_densities(dist, members))
        budget = m
    values = counting.evaluate_batch(members)
    fit = fit_constrained_linear(members, values, weights, v0, v1 - v0)
    return _report(name, counting, fit.coeffs, {"m": m, "exhaustive": exhaustive}, seed, start, budget, [fit])


def kernel_shap(game: Game, m: int, seed=None, w: WeightVector | None = None,
                exhaustive: bool = False) -> EstimateReport:
    """Constrained regression on subsets sampled by the Shapley kernel."""
    start = time.perf_counter()
    _require_shapley(w, game.n, "kernel_shap")
    dist = SizeDistribution.from_subset_weights(game.n, shapley_kernel_log_weights(game.n))
    return _regression_shapley("kernel_shap", game, m, dist, seed, exhaustive, start)


def leverage_distribution(n: int) -> SizeDistribution:
    with np.errstate(divide="ignore"):
        return SizeDistribution.from_subset_weights(n, np.log(shapley_leverage_scores(n)))


def leverage_shap(game: Game, m: int, seed=None, w: WeightVector | None = None,
                  exhaustive: bool = False) -> EstimateReport:
    """Constrained regression on subsets sampled by their leverage scores."""
    start = time.perf_counter()
    _require_shapley(w, game.n, "leverage_shap")
    return _regression_shapley("leverage_shap", game, m, leverage_distribution(game.n), seed, exhaustive, start)


MODELS = ("linear", "constrained_linear", "gbt")


@dataclass(frozen=True, eq=False)
class RegressionMsrConfig:
    k: int = 10
    model: str = "linear"
    gbt: GbtConfig = GbtConfig()
    distribution: SizeDistribution | None = None
    practical: bool = False
    replacement: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")

    def echo(self) -> dict:
        out = {"k": self.k, "model": self.model, "practical": self.practical, "replacement": self.replacement,
               "distribution": "default" if self.distribution is None else "supplied"}
        if self.model == "gbt":
            out["gbt"] = asdict(self.gbt)
        return out


def regression_msr(game: Game, w: WeightVector, m: int, cfg: RegressionMsrConfig = RegressionMsrConfig(),
                   seed=None, name: str = "regression_msr") -> EstimateReport:
    """MSR on the residual v - f plus the exact values of a learned f.

    With ``cfg.practical`` a single f is fit on all samples (slightly
    biased); otherwise samples are split into k folds and each fold is
    corrected with an f trained on the other folds.
    """
    start = time.perf_counter()
    n = game.n
    counting = CountingGame(game)
    rng = np.random.default_rng(seed)
    constrained = cfg.model == "constrained_linear"
    if cfg.distribution is not None:
        dist = cfg.distribution
    elif constrained:
        dist = leverage_distribution(n)
    else:
        dist = default_msr_distribution(w)
    m_samples = m - 2 if constrained else m
    min_samples = 1 if cfg.practical else 2 * cfg.k
    if m_samples < min_samples:
        raise BudgetError(f"{name} with k={cfg.k} needs a larger budget than m={m}")

    batch = sample_subsets(dist, m_samples, cfg.replacement, rng)
    members = batch.members
    ratios = msr_ratios(w, members, log_densities(dist, members))
    values = counting.evaluate_batch(members)
    if constrained:
        v0 = counting(np.zeros(n, dtype=bool))
        v1 = counting(np.ones(n, dtype=bool))
        with np.errstate(divide="ignore"):
            kernel = _kernel_fit_weights(n, members, dist.log_density(members.sum(axis=1)))

    def fit(idx):
        if cfg.model == "linear":
            return fit_linear(members[idx], values[idx])
        if constrained:
            return fit_constrained_linear(members[idx], values[idx], kernel[idx], v0, v1 - v0)
        if len(idx) < 2:
            raise BudgetError(f"{name}: a fold leaves fewer than 2 training samples for gbt")
        return fit_gbt(members[idx], values[idx], cfg.gbt, seed=rng)

    everything = np.arange(m_samples)
    if cfg.practical:
        splits = [(everything, everything)]
    else:
        folds = np.array_split(rng.permutation(m_samples), cfg.k)
        splits = [(np.setdiff1d(everything, fold, assume_unique=True), fold) for fold in folds]
    estimates = []
    fits = []
    for train, held in splits:
        f = fit(train)
        resid = values[held] - f.predict(members[held])
        estimates.append(exact_prob_values(f, w) + (resid[:, None] * ratios[held]).mean(axis=0))
        fits.append(f)
    phi = np.mean(estimates, axis=0)
    config = {"m": m, **cfg.echo()}
    return _report(name, counting, phi, config, seed, start, m, fits)


def linear_msr(game: Game, w: WeightVector, m: int, seed=None, k: int = 10, practical: bool = False,
               replacement: bool = True) -> EstimateReport:
    """Regression MSR with a linear f; for Shapley weights f is the leverage-sampled constrained fit."""
    model = "constrained_linear" if is_shapley(w) and game.n >= 2 else "linear"
    cfg = RegressionMsrConfig(k=k, model=model, practical=practical, replacement=replacement)
    return regression_msr(game, w, m, cfg, seed, name="linear_msr")


def tree_msr(game: Game, w: WeightVector, m: int, seed=None, k: int = 10, practical: bool = False,
             replacement: bool = True, gbt: GbtConfig = GbtConfig()) -> EstimateReport:
    cfg = RegressionMsrConfig(k=k, model="gbt", gbt=gbt, practical=practical, replacement=replacement)
    return regression_msr(game, w, m, cfg, seed, name="tree_msr")


def _shapley_only(fn):
    def run(game, w, m, seed=None, **_):
        return fn(game, m, seed, w=w)

    return run


ESTIMATORS = {
    "monte_carlo": lambda game, w, m, seed=None, **_: monte_carlo(game, w, m, seed=seed),
    "wsl": lambda game, w, m, seed=None, **_: wsl(game, w, m, seed),
    "permutation": lambda game, w, m, seed=None, **_: permutation_estimator(game, w, m, seed),
    "msr": lambda game, w, m, seed=None, replacement=True, **_: msr(game, w, m, seed=seed,
                                                                    replacement=replacement),
    "arm": lambda game, w, m, seed=None, **_: arm(game, w, m, seed),
    "kernel_shap": _shapley_only(kernel_shap),
    "leverage_shap": _shapley_only(leverage_shap),
    "linear_msr": lambda game, w, m, seed=None, k=10, practical=False, replacement=True, **_: linear_msr(
        game, w, m, seed, k, practical, replacement),
    "tree_msr": lambda game, w, m, seed=None, k=10, practical=False, replacement=True, gbt=None, **_: tree_msr(
        game, w, m, seed, k, practical, replacement, gbt or GbtConfig()),
}


def run_estimator(name: str, game: Game, w: WeightVector, m: int, seed=None, **options) -> EstimateReport:
    try:
        fn = ESTIMATORS[name]
    except KeyError:
        raise ValueError(f"unknown estimator {name!r}; choose from {sorted(ESTIMATORS)}") from None
    return fn(game, w, m, seed=seed, **options)


def parse_budget(text, n: int) -> int:
    """``"40n"`` -> 40 * n; plain integers pass through."""
    if isinstance(text, (int, np.integer)):
        value = int(text)
    else:
        text = str(text).strip()
        try:
            value = int(round(float(text[:-1]) * n)) if text.endswith("n") else int(text)
        except ValueError:
            raise ValueError(f"bad budget {text!r}; use an integer or a multiple like 40n") from None
    if value < 1:
        raise ValueError(f"budget must be positive, got {value}")
    return value
