import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from provalue.games import (
    CountingGame,
    LinearGame,
    NoisyGame,
    TableGame,
    game_to_json,
    linear_game,
    load_game,
    random_game,
    tree_game,
    unwrap,
    with_counting,
    with_noise,
)
from provalue.sampling import Subset, all_members
from provalue.trees import Tree, TreeEnsemble, random_ensemble


def stump_ensemble(d=3, feature=0, t=0.5, a=0.2, b=1.0):
    nodes = [
        {"feature": feature, "threshold": t, "left": 1, "right": 2},
        {"value": a},
        {"value": b},
    ]
    return TreeEnsemble(d, [Tree.from_nodes(nodes)])


def test_linear_game_example():
    g = linear_game(7, [1, -2, 0.5], np.ones(3), np.zeros(3))
    assert g(Subset(0, 3)) == 7
    assert g([0, 2]) == pytest.approx(8.5)


def test_linear_game_telescopes():
    g = random_game("linear", 6, seed=1)
    assert g(np.ones(6, bool)) - g(np.zeros(6, bool)) == pytest.approx(g.exact_values().sum(), abs=1e-12)
    assert np.all(LinearGame(3.0, np.zeros(4), np.ones(4), np.zeros(4)).evaluate_batch(all_members(4)) == 3.0)


def test_linear_length_mismatch():
    with pytest.raises(ValueError):
        linear_game(0, [1, 2], [1, 2, 3], [0, 0])


def test_stump_game():
    g = tree_game(stump_ensemble(), [1.0, 0, 0], [[0.0, 0, 0]])
    for S in range(8):
        assert g(S) == (1.0 if S & 1 else 0.2)


def test_identical_trees_same_game():
    one = stump_ensemble()
    two = TreeEnsemble(3, [one.trees[0], one.trees[0]])
    X = all_members(3)
    xe, xb = np.array([1.0, 0.3, -2]), np.array([[0.0, 1, 1]])
    np.testing.assert_array_equal(tree_game(one, xe, xb).evaluate_batch(X), tree_game(two, xe, xb).evaluate_batch(X))


def test_equal_points_constant_game():
    ens = random_ensemble(5, 3, 4, np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=5)
    vals = tree_game(ens, x, [x]).evaluate_batch(all_members(5))
    assert np.all(vals == vals[0])


def test_multiple_baselines_average():
    ens = random_ensemble(4, 2, 3, np.random.default_rng(3))
    xe = np.zeros(4)
    b1, b2 = np.ones(4), -np.ones(4)
    X = all_members(4)
    avg = tree_game(ens, xe, [b1, b2]).evaluate_batch(X)
    sep = (tree_game(ens, xe, [b1]).evaluate_batch(X) + tree_game(ens, xe, [b2]).evaluate_batch(X)) / 2
    np.testing.assert_allclose(avg, sep, atol=1e-15)


@given(st.integers(1, 10), st.integers(0, 1000))
def test_hybrid_points_and_null_players(n, seed):
    rng = np.random.default_rng(seed)
    xe, xb = rng.normal(size=n), rng.normal(size=n)
    null = rng.integers(n)
    xb[null] = xe[null]
    ens = random_ensemble(n, 3, 3, rng)
    g = tree_game(ens, xe, [xb])
    members = all_members(n)
    v = g.evaluate_batch(members)
    idx = np.arange(2**n)
    np.testing.assert_array_equal(v[idx | (1 << null)], v[idx & ~(1 << null)])


def test_random_game_deterministic():
    for kind in ("linear", "forest", "linear_plus_noise"):
        a = random_game(kind, 8, seed=5).evaluate_batch(all_members(8))
        b = random_game(kind, 8, seed=5).evaluate_batch(all_members(8))
        assert a.tobytes() == b.tobytes()
    with pytest.raises(ValueError):
        random_game("nope", 3)


def test_forest_distinct_values_bound():
    g = random_game("forest", 8, seed=2)
    v = g.evaluate_batch(all_members(8))
    leaves = [int((t.feature < 0).sum()) for t in g.ensemble.trees]
    assert len(np.unique(v)) <= np.prod(leaves)


def test_counting_game():
    inner = random_game("linear", 6, seed=0)
    g = with_counting(inner)
    rng = np.random.default_rng(0)
    pool = all_members(6)[rng.permutation(64)[:40]]
    queries = pool[rng.integers(40, size=100)]
    queries[:40] = pool
    first = g.evaluate_batch(queries)
    assert g.calls == 40
    np.testing.assert_array_equal(first, g.evaluate_batch(queries))
    assert g.calls == 40


def test_noise_zero_is_identity():
    inner = random_game("forest", 6, seed=1)
    X = all_members(6)
    assert with_noise(inner, 0.0, seed=3).evaluate_batch(X).tobytes() == inner.evaluate_batch(X).tobytes()


def test_noise_memoized_and_order_free():
    inner = random_game("linear", 5, seed=1)
    g = with_noise(inner, 0.5, seed=9)
    X = all_members(5)
    a = g.evaluate_batch(X)
    assert g(X[7]) == a[7]
    h = with_noise(inner, 0.5, seed=9)
    np.testing.assert_array_equal(h.evaluate_batch(X[::-1])[::-1], a)
    assert np.std(a - inner.evaluate_batch(X)) > 0.1


def test_fresh_noise_differs():
    g = NoisyGame(random_game("linear", 3, seed=0), 1.0, seed=0, fresh=True)
    assert g(0) != g(0)


def test_negative_sigma_rejected():
    with pytest.raises(ValueError):
        with_noise(TableGame([0, 1]), -1.0)


def test_unwrap():
    inner = TableGame([0, 1, 2, 3])
    assert unwrap(with_counting(with_noise(inner, 0.1))) is inner


def test_json_round_trip(stump_game):
    for game in (stump_game, random_game("linear", 4, seed=2), TableGame([0, 1, 2, 4])):
        again = load_game(game_to_json(game))
        X = all_members(game.n)
        np.testing.assert_array_equal(again.evaluate_batch(X), game.evaluate_batch(X))


def test_load_random_and_errors():
    g = load_game({"type": "random", "kind": "forest", "n": 5, "seed": 3})
    assert g.n == 5
    with pytest.raises(ValueError):
        load_game({"type": "mystery"})
    with pytest.raises(ValueError):
        TableGame([1, 2, 3])
