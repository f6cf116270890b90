"""Estimate the scale when parts of each Harris path are hidden or noisy.

Run with: python demos/02_partial_and_noisy_paths.py
"""
import numpy as np

from gwharris.estimators import empirical_variance, per_tree_lambdas
from gwharris.experiments import prune_leaves
from gwharris.robust import add_gaussian_noise, hide_leaves, lambda_tilde, observe_intervals
from gwharris.simulate import binary_offspring, make_rng, simulate_forest
from gwharris.trees import harris_walk

forest = simulate_forest(binary_offspring(0.49), [1000] * 100, rng=11)
paths = [harris_walk(t) for t in forest]
noise = make_rng(12)

full = per_tree_lambdas(forest).mean()
print(f"full paths            : {full:.4f}")
print(f"leaves hidden         : {np.mean([lambda_tilde(hide_leaves(p)) for p in paths]):.4f}")
print(f"only [0,500]+[1000,1500] seen: "
      f"{np.mean([lambda_tilde(observe_intervals(p, [[0, 500], [1000, 1500]])) for p in paths]):.4f}")
print(f"Gaussian noise, sd 5  : {np.mean([lambda_tilde(add_gaussian_noise(p, 5.0, noise)) for p in paths]):.4f}")

# the child-count estimator has nothing to work with once leaves are gone
print(f"1/sqrt(empirical variance), full trees  : {np.mean([empirical_variance(t) for t in forest]) ** -0.5:.4f}")
pruned = [prune_leaves(t) for t in forest]
print(f"1/sqrt(empirical variance), leaves lost : {np.mean([empirical_variance(t) for t in pruned]) ** -0.5:.4f}")
