"""Regenerate the bundled fixture games in src/provalue/fixtures."""
import json
from pathlib import Path

import numpy as np

from provalue.trees import Tree, TreeEnsemble, random_ensemble

OUT = Path(__file__).resolve().parents[1] / "src" / "provalue" / "fixtures"


def stump() -> dict:
    nodes = [
        {"feature": 0, "threshold": 0.5, "left": 1, "right": 2, "value": None},
        {"feature": None, "threshold": None, "left": None, "right": None, "value": 0.2},
        {"feature": None, "threshold": None, "left": None, "right": None, "value": 1.0},
    ]
    model = TreeEnsemble(5, [Tree.from_nodes(nodes)]).to_json()
    return {"type": "tree", "model": model, "explicand": [1.0, 0, 0, 0, 0], "baselines": [[0.0, 0, 0, 0, 0]],
            "expected": {"any": [0.8, 0, 0, 0, 0]}}


def two_player() -> dict:
    # v(empty)=0, v({1})=1, v({2})=2, v({1,2})=4
    return {"type": "table", "values": [0, 1, 2, 4], "expected": {"shapley": [1.5, 2.5]}}


def forest() -> dict:
    rng = np.random.default_rng(20240501)
    d = 8
    model = random_ensemble(d, n_trees=5, max_depth=4, rng=rng)
    explicand = np.round(rng.normal(size=d), 6).tolist()
    baselines = np.round(rng.normal(size=(3, d)), 6).tolist()
    return {"type": "tree", "model": model.to_json(), "explicand": explicand, "baselines": baselines}


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for name, doc in {"stump": stump(), "two_player": two_player(), "forest": forest()}.items():
        (OUT / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")
        print("wrote", OUT / f"{name}.json")
