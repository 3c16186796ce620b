"""Learned surrogates f over coalition membership vectors.

Both families admit exact probabilistic values: a linear f has values equal
to its coefficients, and a boosted tree ensemble over membership bits is
handled by the tree engine with explicand 1 and baseline 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy.linalg import null_space

from .treeprob import tree_prob_values
from .trees import FlatEnsemble, Tree, TreeEnsemble
from .weights import WeightVector


@dataclass(frozen=True, eq=False)
class LinearFit:
    intercept: float
    coeffs: np.ndarray
    regularized: bool = False

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    def predict(self, members) -> np.ndarray:
        return self.intercept + np.asarray(members, dtype=float) @ self.coeffs

    def to_json(self) -> dict:
        return {"intercept": float(self.intercept), "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "LinearFit":
        return cls(float(doc["intercept"]), np.asarray(doc["coeffs"], dtype=float))


@dataclass(frozen=True, eq=False)
class TreeFit:
    ensemble: TreeEnsemble

    @property
    def n(self) -> int:
        return self.ensemble.n_features

    def predict(self, members) -> np.ndarray:
        return self.ensemble.predict(np.asarray(members, dtype=float))

    def to_json(self) -> dict:
        return self.ensemble.to_json()

    @classmethod
    def from_json(cls, doc: dict) -> "TreeFit":
        return cls(TreeEnsemble.from_json(doc))


FittedFunction = LinearFit | TreeFit


@dataclass(frozen=True)
class GbtConfig:
    """Boosting hyperparameters; depth and rate follow XGBoost's defaults (6, 0.3).

    ``l2`` is an optional leaf-value penalty, off by default.
    """

    rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    min_samples_leaf: int = 2
    l2: float = 0.0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")


def _solve_psd(G: np.ndarray, rhs: np.ndarray, scale: float) -> tuple[np.ndarray, bool]:
    """Solve G x = rhs; add a 1e-8 ridge when G is rank-deficient.

    ``scale`` is the weighted squared size of the raw design per column, so
    rank is judged against the data rather than against G itself (G can be
    pure rounding noise when every row lies in its null space).
    """
    dim = G.shape[0]
    if dim == 0:
        return np.zeros(0), False
    scale = max(scale, 1e-300)
    if np.linalg.matrix_rank(G, tol=1e-10 * scale) == dim:
        return np.linalg.solve(G, rhs), False
    return np.linalg.solve(G + 1e-8 * scale * np.eye(dim), rhs), True


def fit_linear(members, targets, sample_weight=None) -> LinearFit:
    """Least squares on membership indicators plus an unpenalized intercept."""
    X = np.asarray(members, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.shape[0] < 1:
        raise ValueError("need at least one sample")
    sw = np.ones(X.shape[0]) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    total = sw.sum()
    x_mean = sw @ X / total
    y_mean = sw @ y / total
    Xc = X - x_mean
    yc = y - y_mean
    G = Xc.T @ (sw[:, None] * Xc)
    coeffs, regularized = _solve_psd(G, Xc.T @ (sw * yc), float(sw @ X.sum(axis=1)) / X.shape[1])
    return LinearFit(float(y_mean - x_mean @ coeffs), coeffs, regularized)


def fit_constrained_linear(members, targets, sample_weight, v_empty: float, anchor: float) -> LinearFit:
    """Weighted least squares on v(S) - v(empty) with coefficients summing to ``anchor``.

    The constraint is eliminated by writing x = anchor/n * 1 + N z with N an
    orthonormal basis of the sum-zero subspace.
    """
    A = np.asarray(members, dtype=float)
    b = np.asarray(targets, dtype=float) - v_empty
    sw = np.asarray(sample_weight, dtype=float)
    n = A.shape[1]
    x0 = np.full(n, anchor / n)
    N = null_space(np.ones((1, n)))
    AN = A @ N
    G = AN.T @ (sw[:, None] * AN)
    z, regularized = _solve_psd(G, AN.T @ (sw * (b - A @ x0)), float(sw @ A.sum(axis=1)) / n)
    coeffs = x0 + N @ z
    # remove rounding drift so the sum matches the anchor
    coeffs += (anchor - coeffs.sum()) / n
    return LinearFit(float(v_empty), coeffs, regularized)


def shapley_kernel_log_weights(n: int) -> np.ndarray:
    """log of (n-1) / (C(n,s) s (n-s)) per size s; infinite weight at s = 0, n is dropped (-inf)."""
    from .weights import log_comb

    s = np.arange(n + 1)
    out = np.full(n + 1, -np.inf)
    inner = s[1:n]
    out[1:n] = np.log(n - 1) - log_comb(n, inner) - np.log(inner) - np.log(n - inner)
    return out


@numba.njit(cache=True)
def _boost(X, y, rounds, max_depth, lr, min_leaf, l2):
    m, n = X.shape
    slots = 2 ** (max_depth + 1) - 1
    feat = np.full((rounds, slots), -1, dtype=np.int64)
    leaf = np.zeros((rounds, slots), dtype=np.bool_)
    val = np.zeros((rounds, slots))
    base = y.mean()
    pred = np.full(m, base)
    losses = np.empty(rounds + 1)
    resid = y - pred
    losses[0] = (resid ** 2).mean()
    node_of = np.zeros(m, dtype=np.int64)
    sum_on = np.zeros((slots, n))
    cnt_on = np.zeros((slots, n), dtype=np.int64)
    node_sum = np.zeros(slots)
    node_cnt = np.zeros(slots, dtype=np.int64)
    for t in range(rounds):
        for i in range(m):
            resid[i] = y[i] - pred[i]
            node_of[i] = 0
        active = np.zeros(slots, dtype=np.bool_)
        active[0] = True
        for depth in range(max_depth + 1):
            lo = 2 ** depth - 1
            hi = 2 ** (depth + 1) - 1
            sum_on[lo:hi, :] = 0.0
            cnt_on[lo:hi, :] = 0
            node_sum[lo:hi] = 0.0
            node_cnt[lo:hi] = 0
            for i in range(m):
                nd = node_of[i]
                if nd < lo or not active[nd]:
                    continue
                node_sum[nd] += resid[i]
                node_cnt[nd] += 1
                if depth < max_depth:
                    for j in range(n):
                        if X[i, j]:
                            sum_on[nd, j] += resid[i]
                            cnt_on[nd, j] += 1
            for nd in range(lo, hi):
                if not active[nd]:
                    continue
                c = node_cnt[nd]
                best_j = -1
                if depth < max_depth and c >= 2 * min_leaf:
                    s_all = node_sum[nd]
                    base_score = s_all * s_all / (c + l2)
                    best_gain = 1e-12 * (abs(base_score) + 1e-300)
                    for j in range(n):
                        c_r = cnt_on[nd, j]
                        c_l = c - c_r
                        if c_r < min_leaf or c_l < min_leaf:
                            continue
                        s_r = sum_on[nd, j]
                        s_l = s_all - s_r
                        gain = s_l * s_l / (c_l + l2) + s_r * s_r / (c_r + l2) - base_score
                        if gain > best_gain:
                            best_gain = gain
                            best_j = j
                if best_j >= 0:
                    feat[t, nd] = best_j
                    active[2 * nd + 1] = True
                    active[2 * nd + 2] = True
                else:
                    leaf[t, nd] = True
                    val[t, nd] = lr * node_sum[nd] / (c + l2) if c + l2 > 0 else 0.0
            if depth < max_depth:
                for i in range(m):
                    nd = node_of[i]
                    if feat[t, nd] >= 0 and nd >= lo:
                        node_of[i] = 2 * nd + 2 if X[i, feat[t, nd]] else 2 * nd + 1
        for i in range(m):
            pred[i] += val[t, node_of[i]]
        loss = 0.0
        for i in range(m):
            r = y[i] - pred[i]
            loss += r * r
        losses[t + 1] = loss / m
    return base, feat, leaf, val, losses


@numba.njit(cache=True)
def _compact(feat, leaf, val, offset, scale):
    """Heap-layout boosted trees -> concatenated node arrays (tree-local child indices)."""
    rounds, slots = feat.shape
    total = 0
    for t in range(rounds):
        for s in range(slots):
            if leaf[t, s] or feat[t, s] >= 0:
                total += 1
    feature = np.full(total, -1, dtype=np.int64)
    threshold = np.full(total, np.nan)
    left = np.full(total, -1, dtype=np.int64)
    right = np.full(total, -1, dtype=np.int64)
    value = np.full(total, np.nan)
    starts = np.zeros(rounds + 1, dtype=np.int64)
    local = np.full(slots, -1, dtype=np.int64)
    pos = 0
    for t in range(rounds):
        starts[t] = pos
        k = 0
        for s in range(slots):
            if leaf[t, s] or feat[t, s] >= 0:
                local[s] = k
                k += 1
            else:
                local[s] = -1
        for s in range(slots):
            j = local[s]
            if j < 0:
                continue
            if leaf[t, s]:
                value[pos + j] = (val[t, s] + offset) * scale
            else:
                feature[pos + j] = feat[t, s]
                threshold[pos + j] = 0.5
                left[pos + j] = local[2 * s + 1]
                right[pos + j] = local[2 * s + 2]
        pos += k
    starts[rounds] = pos
    return feature, threshold, left, right, value, starts


def fit_gbt(members, targets, config: GbtConfig = GbtConfig(), seed=None, return_losses: bool = False):
    """Squared-loss gradient boosting with depth-limited trees split at 0.5 on membership bits.

    Leaf values and split gains use the L2-penalized form sum / (count + l2).

    Split search is exhaustive and ties go to the lowest feature index, so
    the fit is deterministic; ``seed`` is accepted for interface symmetry.
    """
    X = np.ascontiguousarray(np.asarray(members, dtype=np.bool_))
    y = np.ascontiguousarray(np.asarray(targets, dtype=float))
    if X.shape[0] < 2:
        raise ValueError("gradient boosting needs at least 2 samples")
    base, feat, leaf, val, losses = _boost(
        X, y, config.rounds, config.max_depth, config.learning_rate, config.min_samples_leaf, config.l2
    )
    T = config.rounds
    # the ensemble predicts the mean of its trees, so leaves carry T times their
    # boosted contribution; the base score is spread evenly over the trees
    feature, threshold, left, right, value, starts = _compact(feat, leaf, val, base / T, float(T))
    trees = [
        Tree(feature[a:b], threshold[a:b], left[a:b], right[a:b], value[a:b])
        for a, b in zip(starts[:-1].tolist(), starts[1:].tolist())
    ]
    ensemble = TreeEnsemble(X.shape[1], trees, validate=False)
    shift = np.repeat(starts[:-1], np.diff(starts))
    ensemble.__dict__["flat"] = FlatEnsemble(
        feature, threshold, np.where(left >= 0, left + shift, -1), np.where(right >= 0, right + shift, -1),
        value, starts[:-1].copy(),
    )
    fit = TreeFit(ensemble)
    return (fit, losses) if return_losses else fit


def exact_prob_values(f, w: WeightVector) -> np.ndarray:
    if isinstance(f, LinearFit):
        return np.array(f.coeffs, dtype=float)
    if isinstance(f, TreeFit):
        n = f.n
        return tree_prob_values(f.ensemble, np.ones(n), np.zeros((1, n)), w)
    raise TypeError(f"unsupported fitted function {type(f).__name__}")


def fitted_from_json(doc: dict):
    if "trees" in doc:
        return TreeFit.from_json(doc)
    return LinearFit.from_json(doc)
