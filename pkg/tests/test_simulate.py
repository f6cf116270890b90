import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gwharris.simulate import (ConfigError, Forest, OffspringDistribution, OutOfRange, RejectionBudgetExceeded,
                               binary_offspring, derive_seed, explicit_offspring, format_offspring_config,
                               geometric_offspring, make_rng, parse_offspring_config, rotate_to_valid_preorder,
                               sample_conditioned_degree_sequence, simulate_forest, simulate_tree)
from gwharris.trees import build_tree

from oracles import conditioned_law, is_valid_preorder, valid_rotations


def test_binary_offspring_values():
    assert binary_offspring(0.25).probs == (0.125, 0.75, 0.125)
    assert binary_offspring(1.0).probs == (0.5, 0.0, 0.5)
    d = binary_offspring(0.49)
    assert d.probs == pytest.approx((0.245, 0.51, 0.245), abs=1e-15)
    assert d.mean == pytest.approx(1.0, abs=1e-15)
    assert d.variance == pytest.approx(0.49, abs=1e-14)
    assert d.critical


@pytest.mark.parametrize("s2", [0.0, -0.1, 1.01])
def test_binary_offspring_range(s2):
    with pytest.raises(OutOfRange):
        binary_offspring(s2)


def test_geometric_offspring():
    d = geometric_offspring(1e-9)
    assert d.K == 29
    assert d.probs[0] == pytest.approx(0.5, abs=1e-8)
    assert d.probs[0] / d.probs[1] == pytest.approx(2.0, rel=1e-14)
    assert abs(d.mean - 1) <= 1e-6
    assert abs(d.variance - 2) <= 1e-6
    assert 1 / d.sigma == pytest.approx(1 / math.sqrt(2), abs=1e-6)
    with pytest.raises(OutOfRange):
        geometric_offspring(1e-3)


def test_distribution_validation():
    with pytest.raises(ValueError):
        OffspringDistribution((0.5, 0.4))
    with pytest.raises(ValueError):
        OffspringDistribution((1.2, -0.2))
    assert not explicit_offspring((0.5, 0.5)).critical


def test_offspring_config_roundtrip():
    for d in (binary_offspring(0.49), geometric_offspring(), explicit_offspring((0.25, 0.5, 0.25))):
        assert parse_offspring_config(format_offspring_config(d)) == d
    assert parse_offspring_config("# comment\nkind = binary\nsigma2 = 0.25\n") == binary_offspring(0.25)
    for bad in ("kind = binary", "kind = poisson", "nonsense"):
        with pytest.raises(ConfigError):
            parse_offspring_config(bad)


# --- rotation -----------------------------------------------------------------

def test_rotation_examples():
    assert rotate_to_valid_preorder([2, 0, 0]).tolist() == [2, 0, 0]
    assert rotate_to_valid_preorder([0, 2, 0]).tolist() == [2, 0, 0]
    assert rotate_to_valid_preorder([0, 0, 1, 2]).tolist() == [1, 2, 0, 0]
    assert valid_rotations((0, 0, 1, 2)) == [(1, 2, 0, 0)]


@given(st.lists(st.integers(0, 4), min_size=1, max_size=30))
def test_property_rotation_unique_valid(raw):
    # force the total to n - 1 by trimming or padding with zeros
    n = len(raw)
    seq = list(raw)
    excess = sum(seq) - (n - 1)
    i = 0
    while excess > 0:
        take = min(seq[i], excess)
        seq[i] -= take
        excess -= take
        i += 1
    while excess < 0:
        seq[-1] += 1
        excess += 1
    out = rotate_to_valid_preorder(seq).tolist()
    assert is_valid_preorder(out)
    assert valid_rotations(tuple(seq)) == [tuple(out)]


# --- exact law ----------------------------------------------------------------

def test_single_node():
    for d in (binary_offspring(0.3), geometric_offspring()):
        assert sample_conditioned_degree_sequence(d, 1, 0).tolist() == [0]
        assert simulate_tree(d, 1, 0).n == 1


def test_parity_obstruction_raises():
    with pytest.raises(RejectionBudgetExceeded):
        sample_conditioned_degree_sequence(binary_offspring(1.0), 2, 0, max_rounds=10_000)


def test_enumeration_oracle_four_nodes():
    law = conditioned_law(4, (0.25, 0.5, 0.25))
    assert law[(1, 1, 1, 0)] == pytest.approx(4 / 7)
    for seq in ((1, 2, 0, 0), (2, 0, 1, 0), (2, 1, 0, 0)):
        assert law[seq] == pytest.approx(1 / 7)
    assert len(law) == 4  # (3,0,0,0) has probability zero


@pytest.mark.parametrize("n,probs", [(4, (0.25, 0.5, 0.25)), (5, (0.3, 0.4, 0.3)), (6, (0.4, 0.35, 0.1, 0.15))])
def test_exact_law_total_variation(n, probs):
    law = conditioned_law(n, probs)
    dist = OffspringDistribution(probs)
    rng = make_rng(12345)
    draws = 30_000
    counts = Counter(tuple(sample_conditioned_degree_sequence(dist, n, rng).tolist()) for _ in range(draws))
    tv = 0.5 * sum(abs(counts.get(k, 0) / draws - p) for k, p in law.items())
    tv += 0.5 * sum(c / draws for k, c in counts.items() if k not in law)
    assert tv < 0.02


def test_shuffle_uniformity():
    rng = make_rng(7)
    draws = 100_000
    base = np.array([0, 0, 1, 2])
    counts = Counter(tuple(rng.permutation(base).tolist()) for _ in range(draws))
    assert len(counts) == 12
    p = 1 / 12
    se = math.sqrt(p * (1 - p) / draws)
    for c in counts.values():
        assert abs(c / draws - p) < 5 * se


@given(st.integers(1, 300), st.integers(0, 2**32))
def test_property_simulated_tree_size(n, seed):
    tree = simulate_tree(binary_offspring(0.49), n, seed)
    tree.validate()
    assert tree.n == n
    assert int(tree.child_counts().sum()) == n - 1


# --- forests and determinism ---------------------------------------------------

def test_empty_forest():
    assert simulate_forest(binary_offspring(0.5), [], 1).N == 0


def test_forest_determinism_and_jobs(tmp_path):
    d = binary_offspring(0.25)
    a = simulate_forest(d, [20] * 10, 42)
    b = simulate_forest(d, [20] * 10, 42, jobs=3)
    assert a.seeds == b.seeds
    assert all(x.same_shape(y) for x, y in zip(a, b))
    assert a.sizes.tolist() == [20] * 10
    a.save(tmp_path / "a")
    b.save(tmp_path / "b")
    for name in ("manifest.csv", "tree_00003.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    loaded = Forest.load(tmp_path / "a")
    assert loaded.seeds == a.seeds
    assert all(x.same_shape(y) for x, y in zip(loaded, a))
    # tree i depends only on (master seed, i)
    single = simulate_tree(d, 20, make_rng(derive_seed(42, 3)))
    assert single.same_shape(a[3])


def test_forest_manifest_mismatch(tmp_path):
    Forest((build_tree((2, 0, 0)),), (5,)).save(tmp_path)
    (tmp_path / "manifest.csv").write_text("index,size,seed\n0,4,5\n")
    with pytest.raises(ValueError):
        Forest.load(tmp_path)


def test_derive_seed_distinct():
    seeds = {derive_seed(1, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert derive_seed(1, 0) != derive_seed(2, 0)
