"""Decision-tree ensembles: validation, JSON round trip, vectorized prediction.

An ensemble predicts the unweighted mean of its trees. Splits send a point
left when ``x[feature] < threshold``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np


class MalformedEnsembleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Tree:
    """Node arrays; leaves have ``feature == -1`` and a finite ``value``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    root: int = 0

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def depth(self) -> int:
        best = 0
        stack = [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            if self.feature[node] < 0:
                best = max(best, d)
            else:
                stack.append((self.left[node], d + 1))
                stack.append((self.right[node], d + 1))
        return best

    @classmethod
    def from_nodes(cls, nodes: list[dict], root: int = 0) -> "Tree":
        k = len(nodes)
        feature = np.full(k, -1, dtype=np.int64)
        threshold = np.full(k, np.nan)
        left = np.full(k, -1, dtype=np.int64)
        right = np.full(k, -1, dtype=np.int64)
        value = np.full(k, np.nan)
        for idx, node in enumerate(nodes):
            internal = [node.get(key) for key in ("feature", "threshold", "left", "right")]
            leaf_value = node.get("value")
            if leaf_value is not None:
                if any(x is not None for x in internal):
                    raise MalformedEnsembleError(f"node {idx}: leaf carries split fields")
                value[idx] = float(leaf_value)
            else:
                if any(x is None for x in internal):
                    raise MalformedEnsembleError(f"node {idx}: non-leaf without feature/threshold/children")
                feature[idx] = int(node["feature"])
                threshold[idx] = float(node["threshold"])
                left[idx] = int(node["left"])
                right[idx] = int(node["right"])
        return cls(feature, threshold, left, right, value, int(root))

    def to_nodes(self) -> list[dict]:
        out = []
        for idx in range(self.n_nodes):
            if self.feature[idx] < 0:
                out.append({"feature": None, "threshold": None, "left": None, "right": None,
                            "value": float(self.value[idx])})
            else:
                out.append({"feature": int(self.feature[idx]), "threshold": float(self.threshold[idx]),
                            "left": int(self.left[idx]), "right": int(self.right[idx]), "value": None})
        return out

    def validate(self, n_features: int) -> None:
        k = self.n_nodes
        if not 0 <= self.root < k:
            raise MalformedEnsembleError(f"root {self.root} out of range")
        for idx in range(k):
            if self.feature[idx] < 0:
                if not np.isfinite(self.value[idx]):
                    raise MalformedEnsembleError(f"leaf {idx} has no finite value")
                continue
            if self.feature[idx] >= n_features:
                raise MalformedEnsembleError(f"node {idx} splits on feature {self.feature[idx]} >= {n_features}")
            if not np.isfinite(self.threshold[idx]):
                raise MalformedEnsembleError(f"node {idx} has no threshold")
            for child in (self.left[idx], self.right[idx]):
                if not 0 <= child < k:
                    raise MalformedEnsembleError(f"node {idx} has dangling child {child}")
        # every reachable node visited once: rules out cycles and shared subtrees looping back
        seen = np.zeros(k, dtype=bool)
        stack = [self.root]
        while stack:
            node = stack.pop()
            if seen[node]:
                raise MalformedEnsembleError(f"node {node} reachable twice (cycle or shared child)")
            seen[node] = True
            if self.feature[node] >= 0:
                stack.extend((self.left[node], self.right[node]))


@dataclass(frozen=True, eq=False)
class FlatEnsemble:
    """All trees concatenated, for the compiled kernels."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray


class TreeEnsemble:
    def __init__(self, n_features: int, trees: list[Tree], validate: bool = True):
        if not trees:
            raise MalformedEnsembleError("ensemble has no trees")
        self.n_features = int(n_features)
        self.trees = list(trees)
        if validate:
            for t in self.trees:
                t.validate(self.n_features)

    def __repr__(self):
        return f"TreeEnsemble(n_features={self.n_features}, trees={len(self.trees)})"

    @cached_property
    def flat(self) -> FlatEnsemble:
        parts = {k: [] for k in ("feature", "threshold", "left", "right", "value")}
        roots = []
        offset = 0
        for t in self.trees:
            shift = lambda a: np.where(a >= 0, a + offset, -1)  # noqa: E731
            parts["feature"].append(t.feature)
            parts["threshold"].append(t.threshold)
            parts["left"].append(shift(t.left))
            parts["right"].append(shift(t.right))
            parts["value"].append(t.value)
            roots.append(t.root + offset)
            offset += t.n_nodes
        return FlatEnsemble(
            feature=np.concatenate(parts["feature"]).astype(np.int64),
            threshold=np.concatenate(parts["threshold"]).astype(float),
            left=np.concatenate(parts["left"]).astype(np.int64),
            right=np.concatenate(parts["right"]).astype(np.int64),
            value=np.nan_to_num(np.concatenate(parts["value"]).astype(float)),
            roots=np.array(roots, dtype=np.int64),
        )

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        f = self.flat
        return _predict_flat(X, f.feature, f.threshold, f.left, f.right, f.value, f.roots)

    def split_features(self) -> set[int]:
        return {int(x) for t in self.trees for x in t.feature if x >= 0}

    def scaled(self, factor: float) -> "TreeEnsemble":
        """Same structure with every leaf value multiplied by ``factor``."""
        trees = [Tree(t.feature, t.threshold, t.left, t.right, t.value * factor, t.root) for t in self.trees]
        return TreeEnsemble(self.n_features, trees, validate=False)

    def to_json(self) -> dict:
        return {
            "n_features": self.n_features,
            "trees": [{"root": t.root, "nodes": t.to_nodes()} for t in self.trees],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TreeEnsemble":
        try:
            trees = [Tree.from_nodes(t["nodes"], t.get("root", 0)) for t in doc["trees"]]
            return cls(int(doc["n_features"]), trees)
        except (KeyError, TypeError) as exc:
            raise MalformedEnsembleError(f"bad ensemble document: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@numba.njit(cache=True)
def _predict_flat(X, feature, threshold, left, right, value, roots):
    m = X.shape[0]
    out = np.zeros(m)
    for r in range(m):
        total = 0.0
        for root in roots:
            node = root
            while feature[node] >= 0:
                if X[r, feature[node]] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            total += value[node]
        out[r] = total / roots.shape[0]
    return out


def random_ensemble(n_features: int, n_trees: int, max_depth: int, rng, leaf_scale: float = 1.0,
                    stop_prob: float = 0.2, binary: bool = False) -> TreeEnsemble:
    """Random forest-like ensemble.

    With ``binary=True`` every threshold lies in (0, 1), so the ensemble acts
    on membership bits; otherwise thresholds are standard normal.
    """
    rng = np.random.default_rng(rng)
    trees = []
    for _ in range(n_trees):
        nodes: list[dict] = []

        def grow(depth):
            idx = len(nodes)
            nodes.append({})
            if depth == max_depth or (depth > 0 and rng.random() < stop_prob):
                nodes[idx] = {"value": float(rng.normal(scale=leaf_scale))}
                return idx
            feat = int(rng.integers(n_features))
            thr = float(rng.uniform(0.05, 0.95)) if binary else float(rng.normal())
            left = grow(depth + 1)
            right = grow(depth + 1)
            nodes[idx] = {"feature": feat, "threshold": thr, "left": left, "right": right}
            return idx

        grow(0)
        trees.append(Tree.from_nodes(nodes))
    return TreeEnsemble(n_features, trees)
