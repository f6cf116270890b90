"""Ordered rooted trees and their coding walks.

Trees live in an index arena (parent array plus CSR child lists) so that
every traversal is iterative and works for trees with millions of nodes.
Heights follow the convention ``h(root) = 0``; the Harris walk of a tree
with ``n`` nodes is ``(0, h(v_1) + 1, ..., h(v_{2n-1}) + 1, 0)`` where
``v_k`` is the k-th entry of the depth-first traversal.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class InvalidDegreeSequence(ValueError):
    pass


class MalformedPath(ValueError):
    pass


class InvalidWalk(ValueError):
    pass


class InvalidHeightProcess(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OrderedTree:
    """Rooted plane tree stored as an arena.

    ``parent[v]`` is -1 for the root. The children of ``v`` are
    ``child_index[child_start[v]:child_start[v + 1]]`` in left-to-right order.
    """

    parent: np.ndarray
    child_start: np.ndarray
    child_index: np.ndarray
    root: int = 0

    @property
    def n(self) -> int:
        return int(self.parent.shape[0])

    def __len__(self) -> int:
        return self.n

    def children(self, v: int) -> np.ndarray:
        return self.child_index[self.child_start[v]:self.child_start[v + 1]]

    def child_counts(self) -> np.ndarray:
        """Number of children of every node, indexed by node."""
        return np.diff(self.child_start)

    def preorder(self) -> np.ndarray:
        """Node indices in depth-first preorder."""
        order = np.empty(self.n, dtype=np.int64)
        stack = [self.root]
        k = 0
        start, idx = self.child_start, self.child_index
        while stack:
            v = stack.pop()
            order[k] = v
            k += 1
            # reversed so the leftmost child is popped first
            stack.extend(idx[start[v]:start[v + 1]][::-1].tolist())
        return order

    def degree_sequence(self) -> np.ndarray:
        """Child counts listed in depth-first preorder."""
        return self.child_counts()[self.preorder()]

    def heights(self) -> np.ndarray:
        """Height of every node (root at 0), indexed by node."""
        h = np.zeros(self.n, dtype=np.int64)
        par = self.parent
        for v in self.preorder()[1:].tolist():
            h[v] = h[par[v]] + 1
        return h

    def validate(self) -> None:
        n = self.n
        roots = np.flatnonzero(self.parent < 0)
        if roots.tolist() != [self.root]:
            raise ValueError("tree must have exactly one parentless node, the root")
        if self.child_start.shape[0] != n + 1 or self.child_index.shape[0] != n - 1:
            raise ValueError("child arrays do not match the node count")
        seen = np.zeros(n, dtype=np.int64)
        np.add.at(seen, self.child_index, 1)
        if seen[self.root] != 0 or np.any(np.delete(seen, self.root) != 1):
            raise ValueError("every non-root node must be listed once as a child")
        for v in range(n):
            if np.any(self.parent[self.children(v)] != v):
                raise ValueError(f"parent/children mismatch at node {v}")
        if len(set(self.preorder().tolist())) != n:
            raise ValueError("tree is not connected")

    def same_shape(self, other: OrderedTree) -> bool:
        return np.array_equal(self.degree_sequence(), other.degree_sequence())

    def to_text(self) -> str:
        return ",".join(str(int(c)) for c in self.degree_sequence())

    def __repr__(self) -> str:
        seq = self.to_text()
        if len(seq) > 60:
            seq = seq[:57] + "..."
        return f"OrderedTree(n={self.n}, degrees=[{seq}])"


def _from_parents(parent: np.ndarray) -> OrderedTree:
    # nodes are numbered in preorder, so sorting children by index keeps sibling order
    n = parent.shape[0]
    counts = np.bincount(parent[1:], minlength=n) if n > 1 else np.zeros(1, dtype=np.int64)
    start = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=start[1:])
    child_index = np.arange(1, n, dtype=np.int64)[np.argsort(parent[1:], kind="stable")]
    return OrderedTree(parent=parent, child_start=start, child_index=child_index, root=0)


def check_degree_sequence(degrees) -> np.ndarray:
    xi = np.asarray(degrees, dtype=np.int64)
    if xi.ndim != 1 or xi.size == 0:
        raise InvalidDegreeSequence("degree sequence must be a nonempty 1-d sequence")
    if np.any(xi < 0):
        raise InvalidDegreeSequence("child counts must be nonnegative")
    n = xi.size
    if int(xi.sum()) != n - 1:
        raise InvalidDegreeSequence(f"child counts sum to {int(xi.sum())}, expected {n - 1}")
    partial = np.cumsum(xi - 1)
    if np.any(partial[:-1] < 0):
        raise InvalidDegreeSequence("prefix condition fails: walk reaches -1 before the end")
    return xi


def build_tree(preorder_child_counts) -> OrderedTree:
    """Build the tree whose preorder child counts are exactly the input."""
    xi = check_degree_sequence(preorder_child_counts)
    n = xi.size
    parent = np.full(n, -1, dtype=np.int64)
    # stack of [node, remaining child slots]
    stack: list[list[int]] = []
    for v, c in enumerate(xi.tolist()):
        if stack:
            top = stack[-1]
            parent[v] = top[0]
            top[1] -= 1
            if top[1] == 0:
                stack.pop()
        if c > 0:
            stack.append([v, c])
    return _from_parents(parent)


def parse_tree_text(text: str) -> OrderedTree:
    text = text.strip()
    if not text:
        raise InvalidDegreeSequence("empty tree text")
    return build_tree([int(tok) for tok in text.split(",")])


def write_tree(tree: OrderedTree, path) -> None:
    Path(path).write_text(tree.to_text() + "\n")


def read_tree(path) -> OrderedTree:
    return parse_tree_text(Path(path).read_text())


def depth_first_traversal(tree: OrderedTree) -> np.ndarray:
    """Visit sequence of the recursive depth-first search, root repeated after each subtree.

    Node ``v`` appears ``#children(v) + 1`` times; the length is ``2n - 1``.
    """
    out = np.empty(2 * tree.n - 1, dtype=np.int64)
    start, idx = tree.child_start, tree.child_index
    out[0] = tree.root
    k = 1
    # frames: [node, next child position]
    stack = [[tree.root, int(start[tree.root])]]
    while stack:
        frame = stack[-1]
        v, pos = frame
        if pos < start[v + 1]:
            frame[1] = pos + 1
            w = int(idx[pos])
            out[k] = w
            k += 1
            stack.append([w, int(start[w])])
        else:
            stack.pop()
            if stack:
                out[k] = stack[-1][0]
                k += 1
    return out


@dataclass(frozen=True, eq=False)
class HarrisPath:
    """Lattice excursion of length ``2n + 1`` coding an ordered tree."""

    walk: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "walk", np.asarray(self.walk, dtype=np.int64))

    @property
    def n(self) -> int:
        return (self.walk.shape[0] - 1) // 2

    def __eq__(self, other):
        if not isinstance(other, HarrisPath):
            return NotImplemented
        return np.array_equal(self.walk, other.walk)

    def __hash__(self):
        return hash(self.walk.tobytes())

    def validate(self) -> None:
        w = self.walk
        if w.ndim != 1 or w.size < 3 or w.size % 2 == 0:
            raise MalformedPath("Harris walk must have odd length 2n+1 with n >= 1")
        if w[0] != 0 or w[-1] != 0:
            raise MalformedPath("Harris walk must start and end at 0")
        if np.any(np.abs(np.diff(w)) != 1):
            raise MalformedPath("Harris walk steps must be +-1")
        if np.any(w[1:-1] < 1):
            raise MalformedPath("Harris walk must stay positive strictly inside")

    def to_csv(self, path) -> None:
        rows = "\n".join(f"{k},{int(v)}" for k, v in enumerate(self.walk))
        Path(path).write_text("k,walk\n" + rows + "\n")

    @classmethod
    def from_csv(cls, path) -> HarrisPath:
        data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
        if not np.array_equal(data[:, 0], np.arange(data.shape[0])):
            raise MalformedPath("Harris CSV rows must be indexed 0..2n")
        p = cls(data[:, 1])
        p.validate()
        return p


def harris_walk(tree: OrderedTree) -> HarrisPath:
    h = tree.heights()
    walk = np.zeros(2 * tree.n + 1, dtype=np.int64)
    walk[1:-1] = h[depth_first_traversal(tree)] + 1
    return HarrisPath(walk)


def tree_from_harris(path: HarrisPath) -> OrderedTree:
    """Glue the contour back into a tree: every up-step opens a new child."""
    if not isinstance(path, HarrisPath):
        path = HarrisPath(path)
    path.validate()
    n = path.n
    steps = np.diff(path.walk)
    # the first step creates the root and the last one leaves it
    if int((steps > 0).sum()) != n:
        raise MalformedPath("number of up-steps must equal n")
    parent = np.full(n, -1, dtype=np.int64)
    current = 0
    created = 1
    for s in steps[1:-1].tolist():
        if s > 0:
            parent[created] = current
            current = created
            created += 1
        else:
            current = int(parent[current])
    return _from_parents(parent)


def lukasiewicz_walk(degrees) -> np.ndarray:
    """``L(0) = 0`` and ``L(k+1) = L(k) + xi_{k+1} - 1`` for the first ``n`` values."""
    xi = np.asarray(degrees, dtype=np.int64)
    walk = np.zeros(xi.size, dtype=np.int64)
    np.cumsum(xi[:-1] - 1, out=walk[1:])
    return walk


def _check_lukasiewicz(walk: np.ndarray) -> None:
    if walk.ndim != 1 or walk.size == 0 or walk[0] != 0:
        raise InvalidWalk("Lukasiewicz walk must be nonempty and start at 0")
    if np.any(walk < 0):
        raise InvalidWalk("Lukasiewicz walk must stay nonnegative")
    if np.any(np.diff(walk) < -1):
        raise InvalidWalk("Lukasiewicz increments must be >= -1")
    # the walk must be able to reach -1 at step n with one final decrement
    if walk[-1] != 0:
        raise InvalidWalk("last node must close the walk (final value 0)")


def height_process_from_lukasiewicz(walk) -> np.ndarray:
    """``h(k) = #{j < k : L(j) = min_{j <= l <= k} L(l)}``, computed with a monotone stack."""
    walk = np.asarray(walk, dtype=np.int64)
    _check_lukasiewicz(walk)
    out = np.empty(walk.size, dtype=np.int64)
    stack: list[int] = []
    for k, lk in enumerate(walk.tolist()):
        while stack and stack[-1] > lk:
            stack.pop()
        out[k] = len(stack)
        stack.append(lk)
    return out


def _check_height(height: np.ndarray) -> None:
    if height.ndim != 1 or height.size == 0 or height[0] != 0:
        raise InvalidHeightProcess("height process must be nonempty and start at 0")
    if np.any(height[1:] < 1):
        raise InvalidHeightProcess("only the first node may sit at height 0")
    if np.any(np.diff(height) > 1):
        raise InvalidHeightProcess("height can increase by at most 1 per step")


def contour_from_height(height) -> np.ndarray:
    """Contour process of length ``2n - 1`` from the preorder height process.

    Node ``i`` is first visited at time ``b_i = 2i - h(i)``; between visits the
    contour descends one unit per step to the parent of the next node, then
    climbs one step. After the last node it descends to 0 at ``b_n = 2(n - 1)``.
    """
    h = np.asarray(height, dtype=np.int64)
    _check_height(h)
    n = h.size
    b = 2 * np.arange(n) - h
    k = np.arange(2 * n - 1)
    i = np.searchsorted(b, k, side="right") - 1
    contour = h[i] - (k - b[i])
    nxt = np.minimum(i + 1, n - 1)
    climbing = (i + 1 < n) & (b[nxt] == k + 1)
    contour[climbing] = h[nxt[climbing]] - 1
    return contour


def harris_from_contour(contour) -> HarrisPath:
    c = np.asarray(contour, dtype=np.int64)
    walk = np.zeros(c.size + 2, dtype=np.int64)
    walk[1:-1] = c + 1
    return HarrisPath(walk)


def harris_from_degrees(degrees) -> HarrisPath:
    """Harris path through the Lukasiewicz -> height -> contour chain."""
    xi = check_degree_sequence(degrees)
    return harris_from_contour(contour_from_height(height_process_from_lukasiewicz(lukasiewicz_walk(xi))))
