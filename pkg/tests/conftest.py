import json
import os

import hypothesis
import numpy as np
import pytest

from provalue.cli import fixture_path
from provalue.games import TableGame, load_game

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=400, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FAMILY_NAMES = ["shapley", "banzhaf", "beta:2,2", "beta:1,4", "wbanzhaf:0.7", "wbanzhaf:0.9"]


@pytest.fixture
def pair_game():
    # v(empty)=0, v({1})=1, v({2})=2, v({1,2})=4
    return TableGame([0.0, 1.0, 2.0, 4.0])


@pytest.fixture
def stump_doc():
    return json.loads(fixture_path("stump").read_text())


@pytest.fixture
def stump_game(stump_doc):
    return load_game(stump_doc)


@pytest.fixture
def forest_game():
    return load_game(json.loads(fixture_path("forest").read_text()))


def random_table(n, seed):
    return TableGame(np.random.default_rng(seed).normal(size=2**n))
