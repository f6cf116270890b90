"""Simulation scenarios producing plot-ready CSV tables.

Every scenario is driven by an :class:`ExperimentConfig`; replicate ``r``
draws from a generator seeded by ``derive_seed(seed, r)`` so results do not
depend on the number of worker processes.
"""
from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .estimators import (REFERENCE_CORRECTOR, BiasCorrector, empirical_variance, estimate_bias_curve,
                         fit_from_curve, lambda_hat, ls_from_lambdas, per_tree_lambdas,
                         uniform_node_values, wasserstein_from_lambdas)
from .excursion import QuantileTable, build_quantile_table
from .robust import (add_gaussian_noise, contaminate, hide_leaves, lambda_tilde, mask_intervals,
                     observe_intervals, read_mask)
from .simulate import (ConfigError, OffspringDistribution, binary_offspring, derive_seed, make_rng, master_seed,
                       offspring_from_mapping, simulate_forest)
from .trees import build_tree, harris_walk

SCENARIOS = ("bias-curve", "forest-size-sweep", "tree-size-sweep", "outliers",
             "missing-leaves", "masked-path", "gaussian-noise")

# scenario defaults reproduce the regimes studied for each experiment
DEFAULTS = {
    "bias-curve": dict(sigmas=[0.3, 0.5, 0.7, 0.9], sizes=[10, 20, 50, 100, 200, 500, 1000], replicates=2000),
    "forest-size-sweep": dict(sigmas=[0.5], sizes=[20], forest_sizes=[10, 20, 50, 100, 200, 500, 1000],
                              replicates=100),
    "tree-size-sweep": dict(sigmas=[0.9], sizes=[20, 50, 100], forest_sizes=[50], replicates=100),
    "outliers": dict(sigmas=[0.5], sizes=[100], forest_sizes=[500], replicates=100,
                     outliers=[0.03, 2.9], n_outliers=50),
    "missing-leaves": dict(sigmas=[0.7], sizes=[1000], forest_sizes=[200], replicates=1),
    "masked-path": dict(sigmas=[0.7], sizes=[1000], forest_sizes=[200], replicates=1,
                        observed=[[0, 500], [1000, 1500]]),
    "gaussian-noise": dict(sigmas=[0.7], sizes=[1000], forest_sizes=[200], replicates=1, noise=[5.0]),
}


@dataclass
class ExperimentConfig:
    scenario: str
    sigmas: list = field(default_factory=list)
    sizes: list = field(default_factory=list)
    forest_sizes: list = field(default_factory=list)
    replicates: int = 100
    seed: int | None = None
    offspring: OffspringDistribution | None = None  # overrides sigmas when given
    table: str | None = None
    corrector: str | None = None
    out: str = "experiment"
    outliers: list = field(default_factory=list)
    n_outliers: int = 50
    noise: list = field(default_factory=list)
    observed: list = field(default_factory=list)
    mask: str | None = None
    table_samples: int = 20000
    table_grid: int = 500
    min_sigma: float = 0.5

    @classmethod
    def for_scenario(cls, scenario: str, **overrides) -> ExperimentConfig:
        if scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
        values = {**DEFAULTS[scenario], **{k: v for k, v in overrides.items() if v is not None}}
        cfg = cls(scenario=scenario, **values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        for name in ("table", "corrector", "mask"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"{name} file {value} does not exist")

    def distributions(self) -> list[OffspringDistribution]:
        if self.offspring is not None:
            return [self.offspring]
        return [binary_offspring(s * s) for s in self.sigmas]


_LISTS = {"sigmas": float, "sizes": int, "forest_sizes": int, "outliers": float, "noise": float}
_SCALARS = {"replicates": int, "seed": int, "n_outliers": int, "table_samples": int, "table_grid": int,
            "min_sigma": float, "table": str, "corrector": str, "out": str, "mask": str}


def load_config(path) -> ExperimentConfig:
    """Read an INI file with an ``[experiment]`` section and an optional ``[offspring]`` section."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config {path}")
    if "experiment" not in parser:
        raise ConfigError("config needs an [experiment] section")
    sec = parser["experiment"]
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(sec) - known
    if unknown:
        raise ConfigError(f"unknown experiment keys: {', '.join(sorted(unknown))}")
    over: dict = {}
    try:
        for key, value in sec.items():
            if key in _LISTS:
                over[key] = [_LISTS[key](x) for x in value.replace(",", " ").split()]
            elif key in _SCALARS:
                over[key] = _SCALARS[key](value)
            elif key == "observed":
                nums = [float(x) for x in value.replace(",", " ").split()]
                over[key] = [nums[i:i + 2] for i in range(0, len(nums), 2)]
    except ValueError as exc:
        raise ConfigError(f"bad value in config: {exc}") from None
    if "offspring" in parser:
        over["offspring"] = offspring_from_mapping(parser["offspring"])
    if "scenario" not in sec:
        raise ConfigError("config needs a scenario key")
    base = Path(path).parent
    for key in ("table", "corrector", "mask"):
        if key in over and not Path(over[key]).is_absolute():
            over[key] = str(base / over[key])
    return ExperimentConfig.for_scenario(sec["scenario"], **over)


# ---------------------------------------------------------------------------
# helpers

def summarize(values) -> dict:
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    return {"count": v.size, "mean": float(v.mean()), "variance": float(v.var(ddof=1)) if v.size > 1 else 0.0,
            "q1": float(q1), "median": float(med), "q3": float(q3), "min": float(v.min()), "max": float(v.max())}


def write_rows(rows: list[dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return path


def _summary_rows(rows, group_keys, estimators) -> list[dict]:
    groups: dict = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in group_keys), []).append(row)
    out = []
    for key, members in groups.items():
        for est in estimators:
            vals = [m[est] for m in members if m[est] is not None and not math.isnan(m[est])]
            if vals:
                out.append({**dict(zip(group_keys, key)), "estimator": est, **summarize(vals)})
    return out


def resolve_corrector(cfg: ExperimentConfig) -> BiasCorrector:
    return BiasCorrector.load(cfg.corrector) if cfg.corrector else REFERENCE_CORRECTOR


def resolve_table(cfg: ExperimentConfig, master: int, jobs: int = 1) -> QuantileTable:
    if cfg.table:
        return QuantileTable.load(cfg.table)
    return build_quantile_table(cfg.table_samples, cfg.table_grid, derive_seed(master, 2**31), jobs)


def _label(dist: OffspringDistribution) -> float:
    return round(dist.sigma, 12)


# ---------------------------------------------------------------------------
# scenarios

def run_bias_curve(cfg: ExperimentConfig, jobs: int = 1) -> dict:
    master = master_seed(cfg.seed)
    curve = estimate_bias_curve(cfg.distributions(), cfg.sizes, cfg.replicates, master)
    corrector = fit_from_curve(curve, cfg.min_sigma)
    points = [{"sigma": float(s), "n": int(n), "replicates": cfg.replicates,
               "mean_lambda": float(curve.mean_lambda[i, j]), "eta": float(curve.eta[i, j]),
               "eta_fit": float(corrector.eta(n))}
              for i, s in enumerate(curve.sigmas) for j, n in enumerate(curve.sizes)]
    fit = [{"a": corrector.a, "b": corrector.b, "min_sigma": cfg.min_sigma, "seed": master}]
    return {"bias_curve.csv": points, "fit.csv": fit, "_corrector": corrector}


def _forest_estimates(dist, n, N, seed, corrector, table, jobs) -> dict:
    forest = simulate_forest(dist, [n] * N, seed, jobs)
    lam = per_tree_lambdas(forest) * corrector.factor(n)
    un = uniform_node_values(forest, derive_seed(seed, 2**32)) * corrector.factor(n)
    return {"ls": ls_from_lambdas(lam), "w": wasserstein_from_lambdas(lam, table), "un": float(un.mean())}


def run_forest_sweep(cfg: ExperimentConfig, jobs: int = 1) -> dict:
    """Replicated corrected estimates for every (sigma, n, N) cell."""
    master = master_seed(cfg.seed)
    corrector = resolve_corrector(cfg)
    table = resolve_table(cfg, master, jobs)
    rows = []
    cell = 0
    for dist in cfg.distributions():
        for n in cfg.sizes:
            for N in cfg.forest_sizes:
                cell_seed = derive_seed(master, cell)
                cell += 1
                for r in range(cfg.replicates):
                    est = _forest_estimates(dist, n, N, derive_seed(cell_seed, r), corrector, table, jobs)
                    rows.append({"sigma": _label(dist), "n": n, "N": N, "replicate": r,
                                 "target": 1.0 / dist.sigma, **est})
    summary = _summary_rows(rows, ("sigma", "n", "N"), ("ls", "w", "un"))
    return {"replicates.csv": rows, "summary.csv": summary}


def run_outliers(cfg: ExperimentConfig, jobs: int = 1) -> dict:
    """Forests of genuine corrected values with and without ``n_outliers`` copies of each outlier value."""
    master = master_seed(cfg.seed)
    corrector = resolve_corrector(cfg)
    table = resolve_table(cfg, master, jobs)
    dist = cfg.distributions()[0]
    n, N = cfg.sizes[0], cfg.forest_sizes[0]
    target = 1.0 / dist.sigma
    rows = []
    for r in range(cfg.replicates):
        forest = simulate_forest(dist, [n] * N, derive_seed(master, r), jobs)
        genuine = per_tree_lambdas(forest) * corrector.factor(n)
        for value in [None] + list(cfg.outliers):
            sample = genuine if value is None else contaminate(genuine, np.full(cfg.n_outliers, value))
            ls = ls_from_lambdas(sample)
            w = wasserstein_from_lambdas(sample, table)
            rows.append({"replicate": r, "outlier": "none" if value is None else value,
                         "n_outliers": 0 if value is None else cfg.n_outliers, "target": target,
                         "ls": ls, "w": w, "ls_error": abs(ls - target), "w_error": abs(w - target)})
    summary = _summary_rows(rows, ("outlier",), ("ls", "w", "ls_error", "w_error"))
    return {"replicates.csv": rows, "summary.csv": summary}


def prune_leaves(tree):
    """Tree spanned by the internal nodes (the root is kept even when it is a leaf)."""
    counts = tree.child_counts()
    keep = counts > 0
    keep[0] = True
    internal_children = np.zeros(tree.n, dtype=np.int64)
    parent = np.asarray(tree.parent)
    kept = np.flatnonzero(keep[1:]) + 1
    np.add.at(internal_children, parent[kept], 1)
    return build_tree(internal_children[keep])


def _per_tree_rows(cfg: ExperimentConfig, jobs: int, variants) -> list[dict]:
    master = master_seed(cfg.seed)
    dist = cfg.distributions()[0]
    rows = []
    for r in range(cfg.replicates):
        rep_seed = derive_seed(master, r)
        forest = simulate_forest(dist, [cfg.sizes[0]] * cfg.forest_sizes[0], rep_seed, jobs)
        noise_rng = make_rng(derive_seed(rep_seed, 2**32))
        for i, tree in enumerate(forest):
            path = harris_walk(tree)
            row = {"replicate": r, "tree": i, "n": tree.n, "lambda_hat": lambda_hat(path)}
            row.update(variants(tree, path, noise_rng))
            rows.append(row)
    return rows


def run_missing_leaves(cfg: ExperimentConfig, jobs: int = 1) -> dict:
    def variants(tree, path, _):
        pruned = prune_leaves(tree)
        ev_full = empirical_variance(tree)
        ev_pruned = empirical_variance(pruned) if pruned.n > 1 else math.nan
        masked = hide_leaves(path)
        return {"lambda_tilde": math.nan if masked.degenerate else lambda_tilde(masked),
                "empirical_full": 1.0 / math.sqrt(ev_full) if ev_full > 0 else math.nan,
                "empirical_missing": 1.0 / math.sqrt(ev_pruned) if ev_pruned > 0 else math.nan}

    rows = _per_tree_rows(cfg, jobs, variants)
    estimators = ("lambda_hat", "lambda_tilde", "empirical_full", "empirical_missing")
    return {"per_tree.csv": rows, "summary.csv": _summary_rows(rows, ("n",), estimators)}


def run_masked_path(cfg: ExperimentConfig, jobs: int = 1) -> dict:
    mask = read_mask(cfg.mask) if cfg.mask else None

    def variants(tree, path, _):
        m = mask_intervals(path, mask) if mask is not None else observe_intervals(path, cfg.observed)
        return {"lambda_tilde": lambda_tilde(m), "masked_length": m.masked_length}

    rows = _per_tree_rows(cfg, jobs, variants)
    return {"per_tree.csv": rows, "summary.csv": _summary_rows(rows, ("n",), ("lambda_hat", "lambda_tilde"))}


def run_gaussian_noise(cfg: ExperimentConfig, jobs: int = 1) -> dict:
    def variants(tree, path, rng):
        return {f"noisy_sd{s:g}": lambda_tilde(add_gaussian_noise(path, s, rng)) for s in cfg.noise}

    rows = _per_tree_rows(cfg, jobs, variants)
    ests = ("lambda_hat",) + tuple(f"noisy_sd{s:g}" for s in cfg.noise)
    return {"per_tree.csv": rows, "summary.csv": _summary_rows(rows, ("n",), ests)}


RUNNERS = {
    "bias-curve": run_bias_curve,
    "forest-size-sweep": run_forest_sweep,
    "tree-size-sweep": run_forest_sweep,
    "outliers": run_outliers,
    "missing-leaves": run_missing_leaves,
    "masked-path": run_masked_path,
    "gaussian-noise": run_gaussian_noise,
}


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> dict:
    return RUNNERS[cfg.scenario](cfg, jobs)


def write_experiment(results: dict, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows in results.items():
        if name.startswith("_"):
            continue
        written.append(write_rows(rows, out_dir / name))
    if "_corrector" in results:
        results["_corrector"].save(out_dir / "corrector.json")
        written.append(out_dir / "corrector.json")
    return written
