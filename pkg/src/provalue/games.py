"""Value functions v: 2^[n] -> R and their wrappers.

Every game evaluates a boolean ``(m, n)`` membership matrix at once via
``evaluate_batch``; calling a game on a single coalition is a convenience
on top of that.
"""
from __future__ import annotations

import numpy as np

from .sampling import Subset, member_keys
from .trees import TreeEnsemble, random_ensemble


def _as_row(S, n: int) -> np.ndarray:
    if isinstance(S, Subset):
        return S.members()
    if isinstance(S, (int, np.integer)):
        return Subset(int(S), n).members()
    arr = np.asarray(S)
    if arr.dtype == bool and arr.shape == (n,):
        return arr
    row = np.zeros(n, dtype=bool)
    row[list(S)] = True
    return row


class Game:
    """Black-box value function over ``n`` players."""

    n: int

    def evaluate_batch(self, members: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, S) -> float:
        return float(self.evaluate_batch(_as_row(S, self.n)[None, :])[0])


class FunctionGame(Game):
    def __init__(self, n: int, fn):
        self.n = n
        self.fn = fn

    def evaluate_batch(self, members):
        return np.asarray(self.fn(np.asarray(members, dtype=bool)), dtype=float)


class TableGame(Game):
    """Game given by its full value table, indexed by bitmask."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        n = int(np.log2(values.shape[0]))
        if values.ndim != 1 or 2**n != values.shape[0]:
            raise ValueError("table length must be a power of two")
        self.n = n
        self.values = values

    def evaluate_batch(self, members):
        members = np.asarray(members, dtype=bool)
        idx = members.astype(np.int64) @ (1 << np.arange(self.n, dtype=np.int64))
        return self.values[idx]


class LinearGame(Game):
    """v(S) = intercept + sum_i coeffs_i * x^S_i on the hybrid point x^S."""

    def __init__(self, intercept: float, coeffs, explicand, baseline):
        coeffs = np.asarray(coeffs, dtype=float)
        explicand = np.asarray(explicand, dtype=float)
        baseline = np.asarray(baseline, dtype=float)
        if not coeffs.shape == explicand.shape == baseline.shape or coeffs.ndim != 1:
            raise ValueError(
                f"length mismatch: coeffs {coeffs.shape}, explicand {explicand.shape}, baseline {baseline.shape}"
            )
        self.n = coeffs.shape[0]
        self.intercept = float(intercept)
        self.coeffs = coeffs
        self.explicand = explicand
        self.baseline = baseline

    def evaluate_batch(self, members):
        x = np.where(np.asarray(members, dtype=bool), self.explicand, self.baseline)
        return self.intercept + x @ self.coeffs

    def exact_values(self) -> np.ndarray:
        """Every probabilistic value of a linear game is coeffs * (x^e - x^b)."""
        return self.coeffs * (self.explicand - self.baseline)


class TreeGame(Game):
    """Interventional game of a tree ensemble, averaged over baselines."""

    def __init__(self, ensemble: TreeEnsemble, explicand, baselines):
        explicand = np.asarray(explicand, dtype=float)
        baselines = np.atleast_2d(np.asarray(baselines, dtype=float))
        d = ensemble.n_features
        if explicand.shape != (d,) or baselines.shape[1] != d:
            raise ValueError(f"ensemble has {d} features; explicand {explicand.shape}, baselines {baselines.shape}")
        self.n = d
        self.ensemble = ensemble
        self.explicand = explicand
        self.baselines = baselines

    def evaluate_batch(self, members):
        members = np.asarray(members, dtype=bool)
        total = np.zeros(members.shape[0])
        for xb in self.baselines:
            total += self.ensemble.predict(np.where(members, self.explicand, xb))
        return total / self.baselines.shape[0]


class InteractionGame(Game):
    """A linear game plus fixed pairwise terms sum c_jk 1[j in S] 1[k in S]."""

    def __init__(self, linear: LinearGame, pairs, pair_coeffs):
        self.n = linear.n
        self.linear = linear
        self.pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        self.pair_coeffs = np.asarray(pair_coeffs, dtype=float)

    def evaluate_batch(self, members):
        members = np.asarray(members, dtype=bool)
        out = self.linear.evaluate_batch(members)
        both = members[:, self.pairs[:, 0]] & members[:, self.pairs[:, 1]]
        return out + both @ self.pair_coeffs


class CountingGame(Game):
    """Memoizing wrapper; ``calls`` counts distinct coalitions evaluated."""

    def __init__(self, inner: Game):
        self.inner = inner
        self.n = inner.n
        self.calls = 0
        self.cache: dict[bytes, float] = {}

    def evaluate_batch(self, members):
        members = np.asarray(members, dtype=bool)
        keys = member_keys(members)
        cache = self.cache
        miss_rows = []
        pending = {}
        for r, key in enumerate(keys):
            if key not in cache and key not in pending:
                pending[key] = len(miss_rows)
                miss_rows.append(r)
        if miss_rows:
            fresh = self.inner.evaluate_batch(members[miss_rows])
            for key, slot in pending.items():
                cache[key] = float(fresh[slot])
            self.calls += len(miss_rows)
        return np.array([cache[k] for k in keys], dtype=float)


class NoisyGame(Game):
    """Adds N(0, sigma^2) noise to ``inner``.

    By default each coalition's noise is a deterministic function of
    ``(seed, coalition)`` and therefore memoized; ``fresh=True`` draws new
    noise on every query instead.
    """

    def __init__(self, inner: Game, sigma: float, seed: int = 0, fresh: bool = False):
        if sigma < 0:
            raise ValueError(f"noise sigma must be >= 0, got {sigma}")
        self.inner = inner
        self.n = inner.n
        self.sigma = float(sigma)
        self.seed = int(seed)
        self.fresh = fresh
        self._noise: dict[bytes, float] = {}
        self._rng = np.random.default_rng(self.seed)

    def evaluate_batch(self, members):
        members = np.asarray(members, dtype=bool)
        base = self.inner.evaluate_batch(members)
        if self.sigma == 0:
            return base
        if self.fresh:
            return base + self._rng.normal(scale=self.sigma, size=base.shape[0])
        eps = np.empty(base.shape[0])
        for r, key in enumerate(member_keys(members)):
            e = self._noise.get(key)
            if e is None:
                rng = np.random.default_rng([self.seed, int.from_bytes(key, "little"), len(key)])
                e = self._noise[key] = float(rng.standard_normal())
            eps[r] = e
        return base + self.sigma * eps


def with_noise(game: Game, sigma: float, seed: int = 0, fresh: bool = False) -> NoisyGame:
    return NoisyGame(game, sigma, seed, fresh)


def with_counting(game: Game) -> CountingGame:
    return CountingGame(game)


def unwrap(game: Game) -> Game:
    """Strip counting/noise wrappers."""
    while isinstance(game, (CountingGame, NoisyGame)):
        game = game.inner
    return game


def linear_game(intercept, coeffs, explicand, baseline) -> LinearGame:
    return LinearGame(intercept, coeffs, explicand, baseline)


def tree_game(ensemble: TreeEnsemble, explicand, baselines) -> TreeGame:
    return TreeGame(ensemble, explicand, baselines)


def random_game(kind: str, n: int, seed: int = 0, **params) -> Game:
    """Deterministic synthetic games: ``linear``, ``forest`` or ``linear_plus_noise``."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    if kind == "linear":
        return LinearGame(rng.normal(), rng.normal(size=n), rng.normal(size=n), rng.normal(size=n))
    if kind == "forest":
        ensemble = random_ensemble(
            n,
            params.get("n_trees", 10),
            params.get("depth", 4),
            rng,
            stop_prob=params.get("stop_prob", 0.1),
            binary=True,
        )
        return TreeGame(ensemble, np.ones(n), np.zeros((1, n)))
    if kind == "linear_plus_noise":
        linear = LinearGame(rng.normal(), rng.normal(size=n), np.ones(n), np.zeros(n))
        n_pairs = params.get("pairs", n)
        scale = params.get("interaction", 0.1)
        if n < 2:
            return linear
        pairs = np.array([rng.choice(n, size=2, replace=False) for _ in range(n_pairs)])
        return InteractionGame(linear, pairs, scale * rng.normal(size=n_pairs))
    raise ValueError(f"unknown random game kind {kind!r}")


def load_game(doc: dict) -> Game:
    """Build a game from its JSON config document."""
    kind = doc.get("type")
    if kind == "tree":
        ensemble = TreeEnsemble.from_json(doc["model"])
        return TreeGame(ensemble, doc["explicand"], _baselines(doc))
    if kind == "linear":
        model = doc["model"]
        baseline = np.mean(np.atleast_2d(np.asarray(_baselines(doc), dtype=float)), axis=0)
        return LinearGame(model.get("intercept", 0.0), model["coeffs"], doc["explicand"], baseline)
    if kind == "table":
        return TableGame(doc["values"])
    if kind == "random":
        extra = {k: v for k, v in doc.items() if k not in ("type", "kind", "n", "seed")}
        return random_game(doc["kind"], int(doc["n"]), int(doc.get("seed", 0)), **extra)
    raise ValueError(f"unknown game type {kind!r}")


def _baselines(doc):
    if "baselines" in doc:
        return doc["baselines"]
    if "baseline" in doc:
        return [doc["baseline"]]
    raise ValueError("game config needs 'baselines'")


def game_to_json(game: Game) -> dict:
    if isinstance(game, TreeGame):
        return {"type": "tree", "model": game.ensemble.to_json(), "explicand": game.explicand.tolist(),
                "baselines": game.baselines.tolist()}
    if isinstance(game, LinearGame):
        return {"type": "linear", "model": {"intercept": game.intercept, "coeffs": game.coeffs.tolist()},
                "explicand": game.explicand.tolist(), "baselines": [game.baseline.tolist()]}
    if isinstance(game, TableGame):
        return {"type": "table", "values": game.values.tolist()}
    raise TypeError(f"cannot serialize {type(game).__name__}")
