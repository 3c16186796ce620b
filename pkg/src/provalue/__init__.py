"""Exact and estimated probabilistic values (Shapley, Banzhaf, beta Shapley, weighted Banzhaf)."""
from .estimators import (
    EstimateReport,
    RegressionMsrConfig,
    arm,
    kernel_shap,
    leverage_shap,
    linear_msr,
    monte_carlo,
    msr,
    permutation_estimator,
    regression_msr,
    run_estimator,
    tree_msr,
    wsl,
)
from .games import Game, LinearGame, TableGame, TreeGame, load_game, random_game
from .harness import ground_truth, normalized_error
from .regress import GbtConfig
from .sampling import SizeDistribution, Subset, default_msr_distribution
from .treeprob import brute_force_values, tree_prob_values
from .trees import TreeEnsemble
from .weights import WeightFamily, make_weights

__all__ = [
    "EstimateReport", "RegressionMsrConfig", "arm", "kernel_shap", "leverage_shap", "linear_msr", "monte_carlo",
    "msr", "permutation_estimator", "regression_msr", "run_estimator", "tree_msr", "wsl", "Game", "LinearGame",
    "TableGame", "TreeGame", "load_game", "random_game", "ground_truth", "normalized_error", "GbtConfig",
    "SizeDistribution", "Subset", "default_msr_distribution", "brute_force_values", "tree_prob_values",
    "TreeEnsemble", "WeightFamily", "make_weights",
]
