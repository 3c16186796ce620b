import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provalue.games import tree_game
from provalue.sampling import all_members
from provalue.treeprob import brute_force_values, path_case_sums, tree_prob_values
from provalue.trees import MalformedEnsembleError, Tree, TreeEnsemble, random_ensemble
from provalue.weights import TABLE_FAMILIES, make_weights

from .conftest import FAMILY_NAMES, random_table


@pytest.mark.parametrize("family", FAMILY_NAMES)
def test_case_sums_examples(family):
    w = make_weights(family, 7)
    assert path_case_sums(1, 0, 2.5, w).pos == pytest.approx(2.5, rel=1e-12)
    assert path_case_sums(0, 1, 2.5, w).neg == pytest.approx(-2.5, rel=1e-12)
    zero = path_case_sums(3, 2, 0.0, w)
    assert zero.pos == 0 and zero.neg == 0
    with pytest.raises(ValueError):
        path_case_sums(5, 3, 1.0, w)


@given(st.sampled_from(FAMILY_NAMES), st.integers(1, 12), st.data())
def test_case_tables_match_direct_sums(family, n, data):
    from math import comb

    w = make_weights(family, n)
    s = data.draw(st.integers(0, n))
    k = data.draw(st.integers(0, n - s))
    pad = w.p_padded
    pos = sum(pad[l] * comb(n - k - s, l - s) for l in range(s, n - k + 1))
    neg = sum(pad[l + 1] * comb(n - k - s, l - s) for l in range(s, n - k + 1))
    sums = path_case_sums(s, k, 1.0, w)
    assert sums.pos == pytest.approx(pos, rel=1e-10, abs=1e-300)
    assert sums.neg == pytest.approx(-neg, rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("family", FAMILY_NAMES)
def test_stump(stump_game, stump_doc, family):
    w = make_weights(family, 5)
    want = stump_doc["expected"]["any"]
    for engine in ("compiled", "python"):
        got = tree_prob_values(stump_game.ensemble, stump_game.explicand, stump_game.baselines, w, engine=engine)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_equal_points_give_zero():
    ens = random_ensemble(6, 4, 4, np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=6)
    for fam in FAMILY_NAMES:
        assert np.all(tree_prob_values(ens, x, x, make_weights(fam, 6)) == 0)


def test_pair_game_brute_force(pair_game):
    w = make_weights("shapley", 2)
    np.testing.assert_allclose(brute_force_values(pair_game, w), [1.5, 2.5], atol=1e-15)
    assert brute_force_values(pair_game, w).sum() == pytest.approx(4.0)


def test_null_player_brute_force():
    rng = np.random.default_rng(4)
    base = rng.normal(size=8)
    # v ignores player 0
    values = base[np.arange(16) >> 1]
    from provalue.games import TableGame

    for fam in FAMILY_NAMES:
        assert brute_force_values(TableGame(values), make_weights(fam, 4))[0] == pytest.approx(0.0, abs=1e-15)


def test_brute_force_limits():
    from provalue.games import FunctionGame

    g = FunctionGame(21, lambda X: X.sum(axis=1))
    with pytest.raises(ValueError):
        brute_force_values(g, make_weights("shapley", 21))


def _random_case(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 11))
    ens = random_ensemble(d, int(rng.integers(1, 6)), int(rng.integers(1, 5)), rng)
    xe = rng.normal(size=d)
    xb = rng.normal(size=(int(rng.integers(1, 3)), d))
    return ens, xe, xb


@pytest.mark.parametrize("seed", range(25))
def test_matches_brute_force(seed):
    ens, xe, xb = _random_case(seed)
    game = tree_game(ens, xe, xb)
    for fam in FAMILY_NAMES:
        w = make_weights(fam, ens.n_features)
        exact = brute_force_values(game, w)
        for engine in ("compiled", "python"):
            got = tree_prob_values(ens, xe, xb, w, engine=engine)
            assert np.max(np.abs(got - exact)) < 1e-9


@settings(max_examples=25)
@given(st.integers(0, 10**6), st.sampled_from(TABLE_FAMILIES))
def test_matches_brute_force_property(seed, family):
    ens, xe, xb = _random_case(seed)
    w = make_weights(family, ens.n_features)
    exact = brute_force_values(tree_game(ens, xe, xb), w)
    assert np.max(np.abs(tree_prob_values(ens, xe, xb, w) - exact)) < 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_shapley_efficiency(seed):
    ens, xe, xb = _random_case(seed)
    game = tree_game(ens, xe, xb)
    d = ens.n_features
    w = make_weights("shapley", d)
    gap = game(np.ones(d, bool)) - game(np.zeros(d, bool))
    assert abs(tree_prob_values(ens, xe, xb, w).sum() - gap) < 1e-9
    assert abs(brute_force_values(game, w).sum() - gap) < 1e-9


def test_linearity_over_ensembles():
    rng = np.random.default_rng(8)
    a = random_ensemble(6, 3, 4, rng)
    b = random_ensemble(6, 3, 4, rng)
    both = TreeEnsemble(6, a.trees + b.trees)
    xe, xb = rng.normal(size=6), rng.normal(size=6)
    for fam in FAMILY_NAMES:
        w = make_weights(fam, 6)
        mix = tree_prob_values(both, xe, xb, w)
        np.testing.assert_allclose(mix, (tree_prob_values(a, xe, xb, w) + tree_prob_values(b, xe, xb, w)) / 2,
                                   atol=1e-12)


def test_duplicated_feature_symmetry():
    # two copies of one feature; mirrored trees split on either copy
    rng = np.random.default_rng(2)
    base = random_ensemble(4, 2, 3, rng)
    mirrored = []
    for t in base.trees:
        f = np.where(t.feature == 0, 4, t.feature)
        mirrored.append(Tree(f, t.threshold, t.left, t.right, t.value, t.root))
    ens = TreeEnsemble(5, base.trees + mirrored)
    xe = rng.normal(size=5)
    xb = rng.normal(size=5)
    xe[4], xb[4] = xe[0], xb[0]
    for fam in FAMILY_NAMES:
        phi = tree_prob_values(ens, xe, xb, make_weights(fam, 5))
        assert phi[0] == pytest.approx(phi[4], abs=1e-12)


def test_unused_features_exactly_zero():
    rng = np.random.default_rng(6)
    ens = random_ensemble(10, 2, 2, rng)
    unused = sorted(set(range(10)) - ens.split_features())
    assert unused
    phi = tree_prob_values(ens, rng.normal(size=10), rng.normal(size=10), make_weights("beta:1,4", 10))
    assert np.all(phi[unused] == 0.0)


def test_large_n_tree_game_runs():
    rng = np.random.default_rng(0)
    ens = random_ensemble(128, 5, 6, rng)
    phi = tree_prob_values(ens, rng.normal(size=128), rng.normal(size=128), make_weights("shapley", 128))
    assert np.all(np.isfinite(phi))


def test_dimension_mismatch():
    ens = random_ensemble(3, 1, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        tree_prob_values(ens, np.zeros(4), np.zeros(4), make_weights("shapley", 4))
    with pytest.raises(ValueError):
        tree_prob_values(ens, np.zeros(3), np.zeros(3), make_weights("shapley", 3), engine="gpu")


@pytest.mark.parametrize(
    "nodes",
    [
        [{"feature": 0, "threshold": 0.5, "left": 1, "right": 5}, {"value": 1.0}],
        [{"feature": 0, "threshold": None, "left": 1, "right": 1}, {"value": 1.0}],
        [{"feature": 0, "threshold": 0.5, "left": 0, "right": 1}, {"value": 1.0}],
        [{"feature": 7, "threshold": 0.5, "left": 1, "right": 2}, {"value": 1.0}, {"value": 2.0}],
        [{"feature": 0, "threshold": 0.5, "left": 1, "right": 2, "value": 3.0}, {"value": 1.0}, {"value": 2.0}],
    ],
)
def test_malformed_ensembles(nodes):
    with pytest.raises(MalformedEnsembleError):
        TreeEnsemble.from_json({"n_features": 3, "trees": [{"root": 0, "nodes": nodes}]})


def test_ensemble_json_round_trip():
    ens = random_ensemble(5, 3, 4, np.random.default_rng(1))
    again = TreeEnsemble.from_json(ens.to_json())
    X = np.random.default_rng(2).normal(size=(50, 5))
    np.testing.assert_array_equal(ens.predict(X), again.predict(X))
    assert again.dumps() == ens.dumps()


def test_table_games_brute_force_is_linear_in_v():
    g1, g2 = random_table(5, 1), random_table(5, 2)
    from provalue.games import TableGame

    w = make_weights("beta:2,2", 5)
    mix = brute_force_values(TableGame(g1.values + 2 * g2.values), w)
    np.testing.assert_allclose(mix, brute_force_values(g1, w) + 2 * brute_force_values(g2, w), atol=1e-12)
    assert all_members(5).shape == (32, 5)
