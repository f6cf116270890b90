"""Slow, obviously-correct reference implementations used only by the tests."""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def is_valid_preorder(seq) -> bool:
    s = 0
    for k, x in enumerate(seq):
        s += x - 1
        if s == -1:
            return k == len(seq) - 1
    return False


def all_degree_sequences(n: int):
    """Every preorder child-count sequence of an ordered tree with n nodes."""
    for seq in itertools.product(range(n), repeat=n):
        if sum(seq) == n - 1 and is_valid_preorder(seq):
            yield seq


def conditioned_law(n: int, probs) -> dict:
    """Exact law of the preorder sequence of a size-n conditioned tree."""
    weights = {}
    for seq in all_degree_sequences(n):
        w = 1.0
        for x in seq:
            w *= probs[x] if x < len(probs) else 0.0
        if w > 0:
            weights[seq] = w
    total = sum(weights.values())
    return {k: v / total for k, v in weights.items()}


def nested(seq):
    """Recursive-descent parse of a preorder sequence into nested child lists."""
    pos = 0

    def node():
        nonlocal pos
        k = seq[pos]
        pos += 1
        return [node() for _ in range(k)]

    root = node()
    assert pos == len(seq)
    return root


def harris_recursive(tree) -> list[int]:
    walk = [0]

    def visit(children, depth):
        walk.append(depth + 1)
        for c in children:
            visit(c, depth + 1)
            walk.append(depth + 1)

    visit(tree, 0)
    walk.append(0)
    return walk


def heights_recursive(tree) -> list[int]:
    out = []

    def visit(children, depth):
        out.append(depth)
        for c in children:
            visit(c, depth + 1)

    visit(tree, 0)
    return out


def heights_quadratic(walk) -> list[int]:
    """h(k) = #{j < k : L(j) = min over l in [j, k] of L(l)}."""
    return [sum(1 for j in range(k) if walk[j] == min(walk[j:k + 1])) for k in range(len(walk))]


def valid_rotations(seq):
    n = len(seq)
    return [tuple(seq[i:]) + tuple(seq[:i]) for i in range(n) if is_valid_preorder(seq[i:] + seq[:i])]


def mean_excursion(t):
    return 4.0 * np.sqrt(t * (1.0 - t) / (2.0 * math.pi))


def lambda_hat_fine(walk, sub: int = 20000) -> float:
    """Dense-grid trapezoid of H(2n t) E_t with ``sub`` samples per path segment."""
    walk = np.asarray(walk, dtype=float)
    two_n = walk.size - 1
    n = two_n / 2
    x = np.linspace(0.0, two_n, two_n * sub + 1)
    h = np.interp(x, np.arange(walk.size), walk)
    t = x / two_n
    num = np.trapezoid(h * mean_excursion(t), t)
    return num / (2.0 * math.sqrt(n) * 4.0 / (3.0 * math.pi))


def wasserstein_exact(a, b) -> float:
    """W2 between empirical laws with rational breakpoints; squared distance as a Fraction of floats."""
    a = sorted(a)
    b = sorted(b)
    cuts = sorted({Fraction(i, len(a)) for i in range(len(a) + 1)} | {Fraction(j, len(b)) for j in range(len(b) + 1)})
    total = 0.0
    for lo, hi in zip(cuts, cuts[1:]):
        mid = (lo + hi) / 2
        qa = a[math.ceil(mid * len(a)) - 1]
        qb = b[math.ceil(mid * len(b)) - 1]
        total += float(hi - lo) * (qa - qb) ** 2
    return math.sqrt(total)
