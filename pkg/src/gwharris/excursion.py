"""Brownian excursion functionals and the law of the limit variable Lambda.

``Lambda = <e, E> / ||E||^2`` where ``e`` is a standard Brownian excursion and
``E_t = 4 sqrt(t(1-t) / 2pi)`` its mean. Samples are drawn through the
three-dimensional Bessel bridge; the quantile table stores a sorted sample
and answers inverse-CDF queries on the empirical step quantile function.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .simulate import derive_seed, make_rng, master_seed

MEAN_NORM2 = 4.0 / (3.0 * math.pi)  # ||E||_2^2
TABLE_FORMAT_VERSION = 1
CHUNK = 1000


class OutOfRange(ValueError):
    pass


class EmptySample(ValueError):
    pass


class InvalidTable(ValueError):
    pass


def mean_excursion(t):
    """E_t = 4 sqrt(t(1-t) / 2pi); accepts scalars or arrays in [0, 1]."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise OutOfRange("t must lie in [0, 1]")
    out = 4.0 * np.sqrt(t * (1.0 - t) / (2.0 * math.pi))
    return float(out) if out.ndim == 0 else out


def excursion_covariance(t, u):
    """E[e_t e_u], symmetric; the diagonal is returned as 3t(1-t)."""
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    lo, hi = np.minimum(t, u), np.maximum(t, u)
    diag = np.abs(hi - lo) < 1e-10
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(diag | (hi <= 0) | (lo >= 1), 0.0, lo * (1 - hi) / (hi * (1 - lo)))
        off = (2.0 / math.pi) * (
            3.0 * np.sqrt(np.clip(lo * (hi - lo) * (1 - hi), 0, None))
            + (2 * lo * (1 - hi) + hi * (1 - lo)) * np.arcsin(np.sqrt(np.clip(ratio, 0, 1)))
        )
    out = np.where(diag, 3.0 * lo * (1 - lo), off)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class ExcursionPath:
    values: np.ndarray

    @property
    def m(self) -> int:
        return self.values.shape[0] - 1

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)


def bessel_bridge(gaussians: np.ndarray) -> np.ndarray:
    """Excursion values from standard normals of shape (..., 3, m).

    Increments are scaled by sqrt(1/m), bridged by subtracting t B_1, and the
    Euclidean norm over the three coordinates is returned, shape (..., m + 1).
    """
    m = gaussians.shape[-1]
    shape = gaussians.shape[:-1] + (m + 1,)
    b = np.zeros(shape)
    np.cumsum(gaussians, axis=-1, out=b[..., 1:])
    b *= math.sqrt(1.0 / m)
    t = np.linspace(0.0, 1.0, m + 1)
    b -= t * b[..., -1:]
    e = np.sqrt(np.sum(b * b, axis=-2))
    e[..., 0] = 0.0
    e[..., -1] = 0.0
    return e


def sample_excursion(m: int, rng=None) -> ExcursionPath:
    if m < 2:
        raise ValueError("grid size m must be at least 2")
    rng = make_rng(rng)
    return ExcursionPath(bessel_bridge(rng.standard_normal((3, m))))


def _trapezoid_weights(m: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, m + 1)
    w = np.full(m + 1, 1.0 / m)
    w[0] = w[-1] = 0.5 / m
    return w * mean_excursion(t)


def lambda_of_excursion(values) -> np.ndarray:
    """Trapezoid quadrature of ``e * E`` on a uniform grid divided by ||E||^2."""
    values = np.asarray(values, dtype=float)
    w = _trapezoid_weights(values.shape[-1] - 1)
    return values @ w / MEAN_NORM2


def sample_lambda_infinity(m: int, rng=None) -> float:
    return float(lambda_of_excursion(sample_excursion(m, rng).values))


def sample_lambda_batch(count: int, m: int, rng=None) -> np.ndarray:
    """``count`` independent draws of Lambda from one generator."""
    rng = make_rng(rng)
    w = _trapezoid_weights(m) / MEAN_NORM2
    out = np.empty(count)
    step = max(1, 4_000_000 // (3 * m))  # bounds memory to ~100 MB per block
    for lo in range(0, count, step):
        hi = min(count, lo + step)
        out[lo:hi] = bessel_bridge(rng.standard_normal((hi - lo, 3, m))) @ w
    return out


# ---------------------------------------------------------------------------
# quantile table

@dataclass(frozen=True, eq=False)
class QuantileTable:
    sorted_samples: np.ndarray
    m: int
    seed: int | None = None
    format_version: int = TABLE_FORMAT_VERSION
    _cumsum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.sorted_samples, dtype=float)
        object.__setattr__(self, "sorted_samples", x)
        c = np.zeros(x.size + 1)
        np.cumsum(x, out=c[1:])
        object.__setattr__(self, "_cumsum", c)

    @property
    def M(self) -> int:
        return int(self.sorted_samples.size)

    @property
    def mean(self) -> float:
        return float(self._cumsum[-1] / self.M)

    @property
    def variance(self) -> float:
        return float(np.var(self.sorted_samples))

    def validate(self) -> None:
        x = self.sorted_samples
        if x.size == 0:
            raise InvalidTable("empty table")
        if np.any(np.diff(x) < 0):
            raise InvalidTable("samples must be ascending")
        if x[0] <= 0:
            raise InvalidTable("samples must be positive")

    @property
    def table_id(self) -> str:
        return hashlib.sha256(self.sorted_samples.tobytes()).hexdigest()[:16]

    def to_text(self) -> str:
        head = [f"version {self.format_version}", f"M {self.M}", f"m {self.m}",
                f"seed {'' if self.seed is None else self.seed}"]
        body = [f"{v:.17g}" for v in self.sorted_samples.tolist()]
        return "\n".join(head + body) + "\n"

    def save(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(self.to_text())
        tmp.replace(path)

    @classmethod
    def load(cls, path) -> QuantileTable:
        lines = Path(path).read_text().splitlines()
        meta = {}
        for line in lines[:4]:
            key, _, value = line.partition(" ")
            meta[key] = value.strip()
        if set(meta) != {"version", "M", "m", "seed"}:
            raise InvalidTable(f"bad table header in {path}")
        x = np.array([float(v) for v in lines[4:]])
        if x.size != int(meta["M"]):
            raise InvalidTable(f"header says M={meta['M']} but {x.size} samples found")
        table = cls(x, m=int(meta["m"]), seed=int(meta["seed"]) if meta["seed"] else None,
                    format_version=int(meta["version"]))
        table.validate()
        return table

    def _partial_integral(self, a: float) -> float:
        # integral of the step quantile function over (0, a]
        pos = a * self.M
        j = min(int(math.floor(pos)), self.M)
        frac = pos - j
        tail = frac * self.sorted_samples[j] if j < self.M and frac > 0 else 0.0
        return (self._cumsum[j] + tail) / self.M


def build_quantile_table(M: int, m: int = 1000, rng=None, jobs: int = 1) -> QuantileTable:
    """Sort ``M`` Monte Carlo draws of Lambda; chunk ``i`` uses a seed derived from (seed, i)."""
    if M < 1000:
        raise ValueError("a quantile table needs at least 1000 samples")
    seed = master_seed(rng)
    chunks = [(min(CHUNK, M - lo), m, derive_seed(seed, i)) for i, lo in enumerate(range(0, M, CHUNK))]
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_chunk, chunks))
    else:
        parts = [_chunk(c) for c in chunks]
    return QuantileTable(np.sort(np.concatenate(parts)), m=m, seed=seed)


def _chunk(args):
    count, m, seed = args
    return sample_lambda_batch(count, m, make_rng(seed))


def inverse_cdf(table: QuantileTable, u: float) -> float:
    """Right-continuous empirical quantile: the sample of rank ceil(u M)."""
    if not 0 < u < 1:
        raise OutOfRange("u must lie in (0, 1)")
    k = max(1, math.ceil(u * table.M))
    return float(table.sorted_samples[k - 1])


def integral_inverse_cdf(table: QuantileTable, a: float, b: float) -> float:
    """Exact integral of the empirical quantile function over [a, b]."""
    if not 0 <= a <= b <= 1:
        raise OutOfRange("need 0 <= a <= b <= 1")
    return table._partial_integral(b) - table._partial_integral(a)


def block_integrals(table: QuantileTable, N: int) -> np.ndarray:
    """Integrals of the quantile function over ((i-1)/N, i/N] for i = 1..N."""
    edges = np.array([table._partial_integral(i / N) for i in range(N + 1)])
    return np.diff(edges)


def second_moment(table: QuantileTable) -> float:
    x = table.sorted_samples
    return float(np.dot(x, x) / x.size)


def lambda_variance_by_quadrature(grid: int = 500) -> float:
    """Var(Lambda) from the covariance kernel by tensor trapezoid quadrature."""
    if grid < 100:
        raise ValueError("grid must be at least 100")
    t = np.linspace(0.0, 1.0, grid + 1)
    w = np.full(grid + 1, 1.0 / grid)
    w[0] = w[-1] = 0.5 / grid
    f = w * mean_excursion(t)
    g = excursion_covariance(t[:, None], t[None, :])
    return float(f @ g @ f / MEAN_NORM2**2 - 1.0)


def wasserstein2(sample_a, sample_b) -> float:
    """L2 distance between empirical quantile functions on their common rank refinement."""
    a = np.sort(np.asarray(sample_a, dtype=float).ravel())
    b = (sample_b.sorted_samples if isinstance(sample_b, QuantileTable)
         else np.sort(np.asarray(sample_b, dtype=float).ravel()))
    if a.size == 0 or b.size == 0:
        raise EmptySample("both samples must be nonempty")
    # union of the breakpoints i/|A| and j/|B|; integer arithmetic on the common denominator
    na, nb = a.size, b.size
    edges = np.union1d(np.arange(1, na + 1) * nb, np.arange(1, nb + 1) * na)
    widths = np.diff(np.concatenate(([0], edges))) / (na * nb)
    ia = (edges - 1) // nb
    ib = (edges - 1) // na
    return float(math.sqrt(np.dot(widths, (a[ia] - b[ib]) ** 2)))


# ---------------------------------------------------------------------------
# uniform-node competitor

def rayleigh_density(x):
    """Density of sqrt(2/pi) times a unit Rayleigh variable: (pi/2) x exp(-pi x^2 / 4)."""
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, (math.pi / 2) * x * np.exp(-math.pi * x * x / 4), 0.0)


def rayleigh_reference():
    """(density, variance) of the rescaled Rayleigh limit of the uniform-node estimator."""
    return rayleigh_density, (4.0 - math.pi) / math.pi
