"""How least squares and the Wasserstein estimator react to contaminated forests.

Run with: python demos/03_outliers.py
"""
import numpy as np

from gwharris.estimators import REFERENCE_CORRECTOR, ls_from_lambdas, per_tree_lambdas, wasserstein_from_lambdas
from gwharris.excursion import build_quantile_table
from gwharris.robust import contaminate
from gwharris.simulate import binary_offspring, simulate_forest

table = build_quantile_table(20_000, 500, rng=5)
forest = simulate_forest(binary_offspring(0.25), [100] * 500, rng=6)
genuine = per_tree_lambdas(forest) * REFERENCE_CORRECTOR.factor(100)
print("target 1/sigma = 2")
for label, extra in (("clean", []), ("50 x 0.03", [0.03] * 50), ("50 x 2.9", [2.9] * 50), ("50 x 10", [10.0] * 50)):
    sample = contaminate(genuine, extra)
    ls = ls_from_lambdas(sample)
    w = wasserstein_from_lambdas(sample, table)
    print(f"{label:>10}: least squares {ls:.4f}   Wasserstein {w:.4f}")
print(f"2.9 sits at the {np.mean(genuine < 2.9):.0%} quantile of the genuine values")
