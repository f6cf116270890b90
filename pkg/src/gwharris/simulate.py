"""Exact simulation of Galton-Watson trees conditioned on their size.

Pipeline: multinomial child-count profiles drawn until they total ``n - 1``,
uniform shuffle, then rotation to the unique valid preorder sequence
(cycle lemma).
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .trees import OrderedTree, build_tree, read_tree, write_tree

DEFAULT_MAX_ROUNDS = 10**6


class OutOfRange(ValueError):
    pass


class RejectionBudgetExceeded(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# random generators

def make_rng(seed=None) -> np.random.Generator:
    """PCG64 generator; accepts an int, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(master: int, index: int) -> int:
    """64-bit seed for item ``index`` of a batch driven by ``master``."""
    state = np.random.SeedSequence(master, spawn_key=(index,)).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def master_seed(seed) -> int:
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(0, 2**63))
    if seed is None:
        return int(np.random.SeedSequence().generate_state(2, np.uint64)[0] >> np.uint64(1))
    return int(seed)


# ---------------------------------------------------------------------------
# offspring distributions

@dataclass(frozen=True)
class OffspringDistribution:
    probs: tuple
    kind: str = "explicit"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probabilities must be a nonempty sequence")
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", tuple(float(x) for x in p))

    @property
    def K(self) -> int:
        return len(self.probs) - 1

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.probs)

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(self.K + 1), self.array))

    @property
    def variance(self) -> float:
        k = np.arange(self.K + 1)
        return float(np.dot((k - self.mean) ** 2, self.array))

    @property
    def critical(self) -> bool:
        return abs(self.mean - 1.0) <= 1e-6

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)


def binary_offspring(sigma2: float) -> OffspringDistribution:
    """Critical law on {0, 1, 2} with variance ``sigma2``: p0 = p2 = sigma2 / 2."""
    if not 0 < sigma2 <= 1:
        raise OutOfRange(f"sigma2 must lie in (0, 1], got {sigma2}")
    half = sigma2 / 2
    return OffspringDistribution((half, 1.0 - sigma2, half), kind="binary", params={"sigma2": sigma2})


def geometric_offspring(tail_cutoff: float = 1e-9) -> OffspringDistribution:
    """Geometric(1/2) law on {0, 1, ...}, truncated once the tail drops below ``tail_cutoff``."""
    if not 0 < tail_cutoff <= 1e-6:
        raise OutOfRange("tail_cutoff must lie in (0, 1e-6]")
    # the tail beyond K is 2^-(K+1)
    K = 0
    while 2.0 ** -(K + 1) >= tail_cutoff:
        K += 1
    w = 2.0 ** -(np.arange(K + 1) + 1.0)
    return OffspringDistribution(tuple(w / w.sum()), kind="geometric", params={"tail_cutoff": tail_cutoff})


def explicit_offspring(probs) -> OffspringDistribution:
    return OffspringDistribution(tuple(probs), kind="explicit")


def parse_offspring_config(text: str) -> OffspringDistribution:
    """Parse ``key = value`` lines with keys kind, sigma2, probs, tail_cutoff."""
    conf = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        conf[key] = value
    return offspring_from_mapping(conf)


def offspring_from_mapping(conf) -> OffspringDistribution:
    """Build a law from a mapping with keys kind, sigma2, probs, tail_cutoff."""
    kind = conf.get("kind")
    try:
        if kind == "binary":
            return binary_offspring(float(conf["sigma2"]))
        if kind == "geometric":
            return geometric_offspring(float(conf.get("tail_cutoff", 1e-9)))
        if kind == "explicit":
            return explicit_offspring([float(x) for x in conf["probs"].replace(",", " ").split()])
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r} for kind={kind}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown offspring kind {kind!r}")


def format_offspring_config(dist: OffspringDistribution) -> str:
    lines = [f"kind = {dist.kind}"]
    if dist.kind == "binary":
        lines.append(f"sigma2 = {dist.params['sigma2']!r}")
    elif dist.kind == "geometric":
        lines.append(f"tail_cutoff = {dist.params['tail_cutoff']!r}")
    else:
        lines.append("probs = " + ", ".join(repr(p) for p in dist.probs))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# conditioned degree sequences

def rotate_to_valid_preorder(shuffled_counts) -> np.ndarray:
    """Cyclic rotation starting right after the first minimum of the partial-sum walk."""
    xi = np.asarray(shuffled_counts, dtype=np.int64)
    n = xi.size
    if int(xi.sum()) != n - 1:
        raise ValueError("child counts must sum to n - 1")
    walk = np.zeros(n, dtype=np.int64)
    np.cumsum(xi[:-1] - 1, out=walk[1:])
    start = int(np.argmin(walk))
    return np.roll(xi, -start)


def sample_profile(dist: OffspringDistribution, n: int, rng: np.random.Generator,
                   max_rounds: int = DEFAULT_MAX_ROUNDS) -> np.ndarray:
    """Counts ``(N_0, ..., N_K)`` from Multinomial(n, dist) conditioned on ``sum k N_k = n - 1``."""
    p = dist.array
    k = np.arange(p.size)
    rounds = 0
    batch = 16
    while rounds < max_rounds:
        size = min(batch, max_rounds - rounds)
        draws = rng.multinomial(n, p, size=size)
        hits = np.flatnonzero(draws @ k == n - 1)
        if hits.size:
            return draws[hits[0]]
        rounds += size
        batch = min(batch * 2, 4096)
    raise RejectionBudgetExceeded(
        f"no admissible child-count profile for n={n} after {max_rounds} rounds")


def sample_conditioned_degree_sequence(dist: OffspringDistribution, n: int, rng=None,
                                       max_rounds: int = DEFAULT_MAX_ROUNDS) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be positive")
    rng = make_rng(rng)
    counts = sample_profile(dist, n, rng, max_rounds)
    zeta = np.repeat(np.arange(counts.size), counts)
    return rotate_to_valid_preorder(rng.permutation(zeta))


def simulate_tree(dist: OffspringDistribution, n: int, rng=None,
                  max_rounds: int = DEFAULT_MAX_ROUNDS) -> OrderedTree:
    return build_tree(sample_conditioned_degree_sequence(dist, n, rng, max_rounds))


# ---------------------------------------------------------------------------
# forests

@dataclass(frozen=True, eq=False)
class Forest:
    """Tuple of trees (or bare Harris paths) with optional per-tree seeds."""

    trees: tuple
    seeds: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "seeds", tuple(self.seeds))

    @property
    def N(self) -> int:
        return len(self.trees)

    def __len__(self) -> int:
        return len(self.trees)

    def __iter__(self):
        return iter(self.trees)

    def __getitem__(self, i):
        return self.trees[i]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([t.n for t in self.trees], dtype=np.int64)

    def save(self, directory) -> Path:
        """Write one ``tree_XXXXX.txt`` per tree plus ``manifest.csv`` (index,size,seed)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        rows = ["index,size,seed"]
        for i, tree in enumerate(self.trees):
            write_tree(tree, directory / f"tree_{i:05d}.txt")
            seed = self.seeds[i] if i < len(self.seeds) else ""
            rows.append(f"{i},{tree.n},{seed}")
        (directory / "manifest.csv").write_text("\n".join(rows) + "\n")
        return directory

    @classmethod
    def load(cls, directory) -> Forest:
        directory = Path(directory)
        lines = (directory / "manifest.csv").read_text().strip().splitlines()[1:]
        trees, seeds = [], []
        for line in lines:
            idx, size, seed = line.split(",")
            tree = read_tree(directory / f"tree_{int(idx):05d}.txt")
            if tree.n != int(size):
                raise ValueError(f"tree {idx} has {tree.n} nodes, manifest says {size}")
            trees.append(tree)
            if seed:
                seeds.append(int(seed))
        return cls(tuple(trees), tuple(seeds) if len(seeds) == len(trees) else ())


def _simulate_seeded(args):
    dist, n, seed, max_rounds = args
    return simulate_tree(dist, n, make_rng(seed), max_rounds)


def simulate_forest(dist: OffspringDistribution, sizes, rng=None, jobs: int = 1,
                    max_rounds: int = DEFAULT_MAX_ROUNDS) -> Forest:
    """Independent trees, tree ``i`` drawn from a generator seeded by (master seed, i)."""
    sizes = [int(s) for s in sizes]
    master = master_seed(rng)
    seeds = [derive_seed(master, i) for i in range(len(sizes))]
    tasks = [(dist, n, s, max_rounds) for n, s in zip(sizes, seeds)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trees = list(pool.map(_simulate_seeded, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        trees = [_simulate_seeded(t) for t in tasks]
    return Forest(tuple(trees), tuple(seeds))
