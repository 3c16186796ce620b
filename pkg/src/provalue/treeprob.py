"""Exact probabilistic values: tree ensembles by path decomposition, any game by enumeration.

A tree's interventional game is a sum of per-path games. For a path with
``s`` features that only the explicand satisfies and ``k`` that only the
baseline satisfies, the explicand-side features each receive
``leaf * pos[s, k]`` and the baseline-side features ``-leaf * neg[s, k]``;
all other features receive exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .games import Game
from .sampling import all_members
from .trees import TreeEnsemble
from .weights import WeightVector

MAX_BRUTE_FORCE_PLAYERS = 20


@dataclass(frozen=True)
class CaseSums:
    pos: float
    neg: float


def path_case_sums(s_p: int, n_p: int, leaf_value: float, w: WeightVector) -> CaseSums:
    """Case-1 (``pos``) and Case-2 (``neg``, already negated) sums for one path."""
    if s_p < 0 or n_p < 0 or s_p + n_p > w.n:
        raise ValueError(f"need 0 <= s_P, n_P and s_P + n_P <= n; got {s_p}, {n_p}, n={w.n}")
    pos, neg = w.case_tables
    return CaseSums(leaf_value * pos[s_p, n_p], -leaf_value * neg[s_p, n_p])


def tree_prob_values(ensemble: TreeEnsemble, explicand, baselines, w: WeightVector,
                     engine: str = "compiled") -> np.ndarray:
    """Exact probabilistic values of the interventional tree-ensemble game.

    ``baselines`` is one baseline vector or a list of them; results are
    averaged over trees and baselines. ``engine="python"`` runs the plain
    recursive implementation, ``"compiled"`` the numba one.
    """
    explicand = np.asarray(explicand, dtype=float)
    baselines = np.atleast_2d(np.asarray(baselines, dtype=float))
    d = ensemble.n_features
    if w.n != d or explicand.shape != (d,) or baselines.shape[1] != d:
        raise ValueError(f"dimension mismatch: ensemble {d}, weights {w.n}, explicand {explicand.shape}, "
                         f"baselines {baselines.shape}")
    pos, neg = w.case_tables
    if engine == "python":
        return _tree_prob_python(ensemble, explicand, baselines, pos, -neg)
    if engine != "compiled":
        raise ValueError(f"unknown engine {engine!r}")
    f = ensemble.flat
    return _tree_prob_flat(f.feature, f.threshold, f.left, f.right, f.value, f.roots,
                           explicand, baselines, pos, -neg)


def _tree_prob_python(ensemble, xe, baselines, pos_tab, neg_tab):
    d = ensemble.n_features
    phi = np.zeros(d)
    for tree in ensemble.trees:
        feat, thr, left, right, value = tree.feature, tree.threshold, tree.left, tree.right, tree.value
        for xb in baselines:
            phi_temp = np.zeros(d)
            ef_seen = np.zeros(d, dtype=np.int64)
            bf_seen = np.zeros(d, dtype=np.int64)

            def recurse(node, s_p, n_p):
                f = feat[node]
                if f < 0:
                    return value[node] * pos_tab[s_p, n_p], value[node] * neg_tab[s_p, n_p]
                e_child = left[node] if xe[f] < thr[node] else right[node]
                b_child = left[node] if xb[f] < thr[node] else right[node]
                if ef_seen[f] > 0:
                    return recurse(e_child, s_p, n_p)
                if bf_seen[f] > 0:
                    return recurse(b_child, s_p, n_p)
                if e_child == b_child:
                    return recurse(e_child, s_p, n_p)
                ef_seen[f] += 1
                pos_e, neg_e = recurse(e_child, s_p + 1, n_p)
                ef_seen[f] -= 1
                bf_seen[f] += 1
                pos_b, neg_b = recurse(b_child, s_p, n_p + 1)
                bf_seen[f] -= 1
                phi_temp[f] += pos_e + neg_b
                return pos_e + pos_b, neg_e + neg_b

            recurse(tree.root, 0, 0)
            phi += phi_temp
    return phi / (len(ensemble.trees) * baselines.shape[0])


@numba.njit(cache=True)
def _tree_prob_one(root, feat, thr, left, right, value, xe, xb, ef_seen, bf_seen, pos_tab, neg_tab,
                   phi_temp, st_node, st_s, st_k, st_stage, st_pos_e, st_neg_e):
    """The recursion above with an explicit frame stack.

    Stage 0 enters a node, stage 1 has the explicand child's sums, stage 2
    has both children's sums.
    """
    top = 0
    st_node[0] = root
    st_s[0] = 0
    st_k[0] = 0
    st_stage[0] = 0
    ret_pos = 0.0
    ret_neg = 0.0
    while top >= 0:
        node = st_node[top]
        f = feat[node]
        stage = st_stage[top]
        if stage == 0:
            if f < 0:
                ret_pos = value[node] * pos_tab[st_s[top], st_k[top]]
                ret_neg = value[node] * neg_tab[st_s[top], st_k[top]]
                top -= 1
                continue
            e_child = left[node] if xe[f] < thr[node] else right[node]
            b_child = left[node] if xb[f] < thr[node] else right[node]
            # forced or shared routes replace the frame (tail call)
            if ef_seen[f] > 0:
                st_node[top] = e_child
                continue
            if bf_seen[f] > 0:
                st_node[top] = b_child
                continue
            if e_child == b_child:
                st_node[top] = e_child
                continue
            ef_seen[f] += 1
            st_stage[top] = 1
            top += 1
            st_node[top] = e_child
            st_s[top] = st_s[top - 1] + 1
            st_k[top] = st_k[top - 1]
            st_stage[top] = 0
        elif stage == 1:
            ef_seen[f] -= 1
            st_pos_e[top] = ret_pos
            st_neg_e[top] = ret_neg
            bf_seen[f] += 1
            st_stage[top] = 2
            b_child = left[node] if xb[f] < thr[node] else right[node]
            top += 1
            st_node[top] = b_child
            st_s[top] = st_s[top - 1]
            st_k[top] = st_k[top - 1] + 1
            st_stage[top] = 0
        else:
            bf_seen[f] -= 1
            phi_temp[f] += st_pos_e[top] + ret_neg
            ret_pos = st_pos_e[top] + ret_pos
            ret_neg = st_neg_e[top] + ret_neg
            top -= 1


@numba.njit(cache=True)
def _tree_prob_flat(feat, thr, left, right, value, roots, xe, baselines, pos_tab, neg_tab):
    d = xe.shape[0]
    phi = np.zeros(d)
    ef_seen = np.zeros(d, dtype=np.int64)
    bf_seen = np.zeros(d, dtype=np.int64)
    phi_temp = np.zeros(d)
    depth_cap = feat.shape[0] + 1
    st_node = np.zeros(depth_cap, dtype=np.int64)
    st_s = np.zeros(depth_cap, dtype=np.int64)
    st_k = np.zeros(depth_cap, dtype=np.int64)
    st_stage = np.zeros(depth_cap, dtype=np.int64)
    st_pos_e = np.zeros(depth_cap)
    st_neg_e = np.zeros(depth_cap)
    for root in roots:
        for b in range(baselines.shape[0]):
            phi_temp[:] = 0.0
            _tree_prob_one(root, feat, thr, left, right, value, xe, baselines[b], ef_seen, bf_seen,
                           pos_tab, neg_tab, phi_temp, st_node, st_s, st_k, st_stage, st_pos_e, st_neg_e)
            phi += phi_temp
    return phi / (roots.shape[0] * baselines.shape[0])


def brute_force_values(game: Game, w: WeightVector) -> np.ndarray:
    """sum_{S not containing i} p_|S| [v(S + i) - v(S)] by full enumeration."""
    n = game.n
    if n > MAX_BRUTE_FORCE_PLAYERS:
        raise ValueError(f"brute force supports n <= {MAX_BRUTE_FORCE_PLAYERS}, got {n}")
    if w.n != n:
        raise ValueError(f"weights for n={w.n} but game has n={n}")
    values = np.asarray(game.evaluate_batch(all_members(n)), dtype=float)
    masks = np.arange(2**n, dtype=np.int64)
    sizes = np.zeros(2**n, dtype=np.int64)
    for i in range(n):
        sizes += (masks >> i) & 1
    phi = np.empty(n)
    for i in range(n):
        without = masks[((masks >> i) & 1) == 0]
        phi[i] = np.sum(w.p[sizes[without]] * (values[without | (1 << i)] - values[without]))
    return phi
