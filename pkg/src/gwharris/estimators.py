"""Estimators of the inverse standard deviation from trees and forests.

The per-tree statistic is the least-squares fit of the rescaled Harris path
onto twice the mean excursion ``E``; ``<H(2n.), E>`` is integrated exactly
because ``H`` is piecewise linear and ``E`` has a closed-form antiderivative.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .excursion import MEAN_NORM2, QuantileTable, block_integrals, second_moment
from .simulate import (Forest, OffspringDistribution, make_rng, master_seed, derive_seed,
                       simulate_tree)
from .trees import HarrisPath, OrderedTree, harris_walk

_E_SCALE = 4.0 / math.sqrt(2.0 * math.pi)
_E2_SCALE = 16.0 / (2.0 * math.pi)


class EmptyForest(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class DegenerateFit(ValueError):
    pass


# ---------------------------------------------------------------------------
# exact integrals of piecewise-linear functions against E

def _F0(t):
    # antiderivative of sqrt(t(1-t))
    s = np.sqrt(np.clip(t * (1 - t), 0, None))
    return (2 * t - 1) * s / 4 + np.arcsin(np.clip(2 * t - 1, -1, 1)) / 8


def _F1(t):
    # antiderivative of t sqrt(t(1-t))
    q = np.clip(t * (1 - t), 0, None)
    return _F0(t) / 2 - q * np.sqrt(q) / 3


def linear_pieces_against_mean(a, b, ha, hb):
    """Sum over pieces of the integral on [a, b] of the linear interpolant (ha -> hb) times E."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ha = np.asarray(ha, dtype=float)
    hb = np.asarray(hb, dtype=float)
    width = b - a
    keep = width > 0
    a, b, ha, hb, width = a[keep], b[keep], ha[keep], hb[keep], width[keep]
    mid = (a + b) / 2
    d0 = _F0(b) - _F0(a)
    d1 = _F1(b) - _F1(a)
    slope = (hb - ha) / width
    return float(_E_SCALE * np.sum((ha + hb) / 2 * d0 + slope * (d1 - mid * d0)))


def mean_squared_integral(a, b):
    """Sum over pieces of the integral of E_t^2 on [a, b]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    prim = lambda t: t * t / 2 - t ** 3 / 3  # noqa: E731
    return float(_E2_SCALE * np.sum(prim(b) - prim(a)))


@lru_cache(maxsize=256)
def _hat_weights(n: int) -> np.ndarray:
    # weight of breakpoint k in <H(2n.), E> for a path with 2n unit segments
    t = np.arange(2 * n + 1) / (2 * n)
    a, b = t[:-1], t[1:]
    mid = (a + b) / 2
    d0 = _F0(b) - _F0(a)
    d1 = _F1(b) - _F1(a)
    tilt = (d1 - mid * d0) * (2 * n)
    w = np.zeros(2 * n + 1)
    w[:-1] += d0 / 2 - tilt
    w[1:] += d0 / 2 + tilt
    w *= _E_SCALE
    w.setflags(write=False)
    return w


def path_values(obj) -> np.ndarray:
    """Breakpoint values of a Harris path given as a tree, a HarrisPath or an array."""
    if isinstance(obj, OrderedTree):
        return harris_walk(obj).walk
    if isinstance(obj, HarrisPath):
        return obj.walk
    values = np.asarray(obj, dtype=float)
    if values.ndim != 1 or values.size < 3 or values.size % 2 == 0:
        raise ValueError("a path needs 2n+1 breakpoint values with n >= 1")
    return values


def lambda_hat(path) -> float:
    """<H(2n.), E> / (2 sqrt(n) ||E||^2) for one tree or path."""
    values = path_values(path)
    n = (values.size - 1) // 2
    return float(np.dot(_hat_weights(n), values) / (2.0 * math.sqrt(n) * MEAN_NORM2))


def per_tree_lambdas(forest) -> np.ndarray:
    return np.array([lambda_hat(t) for t in forest], dtype=float)


# ---------------------------------------------------------------------------
# forest estimators

def _require_nonempty(values: np.ndarray) -> None:
    if values.size == 0:
        raise EmptyForest("estimation needs at least one tree")


def ls_from_lambdas(lambdas, weights=None) -> float:
    lam = np.asarray(lambdas, dtype=float)
    _require_nonempty(lam)
    if weights is not None:
        lam = lam * np.asarray(weights, dtype=float)
    return float(np.mean(lam))


def wasserstein_from_lambdas(lambdas, table: QuantileTable, weights=None) -> float:
    """Scale aligning the empirical law of ``lambdas`` with the tabulated Lambda law.

    ``weights`` (e.g. bias correctors) follow their tree to its rank in the
    order statistic; ties are broken by input position.
    """
    lam = np.asarray(lambdas, dtype=float)
    _require_nonempty(lam)
    table.validate()
    order = np.argsort(lam, kind="stable")
    ranked = lam[order]
    if weights is not None:
        ranked = ranked * np.asarray(weights, dtype=float)[order]
    return float(np.dot(ranked, block_integrals(table, lam.size)) / second_moment(table))


def lambda_ls(forest) -> float:
    return ls_from_lambdas(per_tree_lambdas(forest))


def lambda_wasserstein(forest, table: QuantileTable) -> float:
    return wasserstein_from_lambdas(per_tree_lambdas(forest), table)


def empirical_mean(tree: OrderedTree) -> float:
    return float(np.mean(tree.child_counts()))


def empirical_variance(tree: OrderedTree) -> float:
    x = tree.degree_sequence().astype(float)
    return float(np.mean((x - (1.0 - 1.0 / x.size)) ** 2))


def uniform_node_estimate(tree: OrderedTree, rng=None) -> float:
    """sqrt(2/pi) h(v) / sqrt(n) for a node v drawn uniformly (root included)."""
    rng = make_rng(rng)
    v = int(rng.integers(tree.n))
    return math.sqrt(2.0 / math.pi) * float(tree.heights()[v]) / math.sqrt(tree.n)


def uniform_node_values(forest, rng=None) -> np.ndarray:
    rng = make_rng(rng)
    return np.array([uniform_node_estimate(t, rng) for t in forest], dtype=float)


def lambda_un(forest, rng=None) -> float:
    values = uniform_node_values(forest, rng)
    _require_nonempty(values)
    return float(values.mean())


# ---------------------------------------------------------------------------
# finite-size bias correction

@dataclass(frozen=True)
class BiasCorrector:
    """Finite-size bias model ``eta(n) = 1 - 1 / (a sqrt(n) + b)``.

    ``eta(n)`` approximates ``E[lambda_hat] / sigma^-1`` for trees of size n
    (it lies in (0, 1) because small trees sit below the limiting contour), so
    corrected estimators multiply each per-tree value by ``factor(n) = 1 / eta(n)``.
    ``a = inf`` gives the identity corrector.
    """

    a: float
    b: float

    def eta(self, n):
        n = np.asarray(n, dtype=float)
        if math.isinf(self.a):
            out = np.ones_like(n)
        else:
            out = 1.0 - 1.0 / (self.a * np.sqrt(n) + self.b)
        return float(out) if out.ndim == 0 else out

    def factor(self, n):
        return 1.0 / self.eta(n)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps({"a": self.a, "b": self.b}) + "\n")

    @classmethod
    def load(cls, path) -> BiasCorrector:
        data = json.loads(Path(path).read_text())
        return cls(float(data["a"]), float(data["b"]))


REFERENCE_CORRECTOR = BiasCorrector(0.504273, 0.9754839)
IDENTITY_CORRECTOR = BiasCorrector(math.inf, 0.0)


def fit_corrector(sizes, etas, weights=None) -> BiasCorrector:
    """Weighted least squares of 1/(1 - eta) on sqrt(n)."""
    n = np.asarray(sizes, dtype=float)
    eta = np.asarray(etas, dtype=float)
    w = np.ones_like(n) if weights is None else np.asarray(weights, dtype=float)
    keep = w > 0
    if np.unique(n[keep]).size < 2:
        raise DegenerateFit("need at least two distinct tree sizes with positive weight")
    x = np.sqrt(n[keep])
    y = 1.0 / (1.0 - eta[keep])
    sw = np.sqrt(w[keep])
    design = np.column_stack([x, np.ones_like(x)]) * sw[:, None]
    (a, b), *_ = np.linalg.lstsq(design, y * sw, rcond=None)
    return BiasCorrector(float(a), float(b))


@dataclass
class BiasCurve:
    """Monte Carlo eta(n) = mean(lambda_hat) / sigma^-1 for every (sigma, n) cell."""

    sigmas: np.ndarray
    sizes: np.ndarray
    eta: np.ndarray  # shape (len(sigmas), len(sizes))
    mean_lambda: np.ndarray
    replicates: int


def estimate_bias_curve(dists, sizes, replicates: int, rng=None) -> BiasCurve:
    seed = master_seed(rng)
    sigmas = np.array([d.sigma for d in dists])
    sizes = np.asarray(sizes, dtype=np.int64)
    means = np.empty((len(dists), sizes.size))
    cell = 0
    for i, dist in enumerate(dists):
        for j, n in enumerate(sizes.tolist()):
            gen = make_rng(derive_seed(seed, cell))
            cell += 1
            means[i, j] = np.mean([lambda_hat(simulate_tree(dist, n, gen)) for _ in range(replicates)])
    eta = means * sigmas[:, None]
    return BiasCurve(sigmas, sizes, eta, means, replicates)


def fit_bias_corrector(dists, sizes, replicates: int = 2000, rng=None,
                       min_sigma: float = 0.5) -> BiasCorrector:
    """Pool every (sigma, n) cell with sigma >= ``min_sigma`` and fit eta(n)."""
    if replicates < 100:
        raise ValueError("at least 100 replicates per cell are required")
    if len(set(int(s) for s in sizes)) < 2 or len(sizes) < 3:
        raise DegenerateFit("need at least 3 sizes, not all equal")
    curve = estimate_bias_curve(dists, sizes, replicates, rng)
    return fit_from_curve(curve, min_sigma)


def fit_from_curve(curve: BiasCurve, min_sigma: float = 0.5) -> BiasCorrector:
    n = np.broadcast_to(curve.sizes, curve.eta.shape).ravel()
    w = np.broadcast_to((curve.sigmas >= min_sigma - 1e-12)[:, None], curve.eta.shape).ravel()
    return fit_corrector(n, curve.eta.ravel(), w.astype(float))


# ---------------------------------------------------------------------------
# reports

@dataclass
class EstimateReport:
    sizes: list
    per_tree_lambda: list
    raw_ls: float
    corrected_ls: float
    raw_w: float | None = None
    corrected_w: float | None = None
    raw_un: float | None = None
    corrected_un: float | None = None
    table_id: str | None = None
    corrector: dict = field(default_factory=dict)
    seed: int | None = None
    version: str = __version__

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_tree"] = [{"size": int(s), "lambda": float(v)}
                         for s, v in zip(d.pop("sizes"), d.pop("per_tree_lambda"))]
        if math.isinf(d["corrector"].get("a", 0.0)):
            d["corrector"]["a"] = "inf"
        return d

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> EstimateReport:
        d = json.loads(text)
        per_tree = d.pop("per_tree")
        if d.get("corrector", {}).get("a") == "inf":
            d["corrector"]["a"] = math.inf
        return cls(sizes=[p["size"] for p in per_tree],
                   per_tree_lambda=[p["lambda"] for p in per_tree], **d)


def corrected_estimates(forest, per_tree_lambda, corrector: BiasCorrector,
                        table: QuantileTable | None = None, un_values=None,
                        seed: int | None = None) -> EstimateReport:
    """Raw and bias-corrected least-squares, Wasserstein and uniform-node estimates."""
    sizes = forest.sizes if isinstance(forest, Forest) else np.array([t.n for t in forest])
    lam = np.asarray(per_tree_lambda, dtype=float)
    if lam.size != sizes.size or (un_values is not None and len(un_values) != sizes.size):
        raise LengthMismatch("per-tree values must match the number of trees")
    _require_nonempty(lam)
    factor = np.atleast_1d(corrector.factor(sizes))
    report = EstimateReport(
        sizes=[int(s) for s in sizes],
        per_tree_lambda=[float(v) for v in lam],
        raw_ls=ls_from_lambdas(lam),
        corrected_ls=ls_from_lambdas(lam, factor),
        corrector={"a": corrector.a, "b": corrector.b},
        seed=seed,
    )
    if table is not None:
        report.raw_w = wasserstein_from_lambdas(lam, table)
        report.corrected_w = wasserstein_from_lambdas(lam, table, factor)
        report.table_id = table.table_id
    if un_values is not None:
        un = np.asarray(un_values, dtype=float)
        report.raw_un = float(un.mean())
        report.corrected_un = float(np.mean(factor * un))
    return report


def estimate_forest(forest, corrector: BiasCorrector = REFERENCE_CORRECTOR,
                    table: QuantileTable | None = None, uniform_node: bool = False,
                    rng=None) -> EstimateReport:
    seed = master_seed(rng) if uniform_node else None
    un = uniform_node_values(forest, seed) if uniform_node else None
    return corrected_estimates(forest, per_tree_lambdas(forest), corrector, table, un, seed)
