"""The hierarchical clustering tree: construction, traversal, serialization.

Node ids follow one fixed convention everywhere: leaves are ``0..n-1`` and
internal nodes are ``n..n_nodes-1``.  Binary trees have exactly ``2n-1``
nodes.  N-ary trees exist only so imported trees can be scored with the
non-binary objective extensions; every built-in algorithm emits binary trees.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InvalidParamError, NonBinaryTreeError

BINARY = "binary"
NARY = "nary"


@dataclass
class Dendrogram:
    """Rooted tree over leaf indices 0..n-1 with per-node subtree sizes."""

    n_leaves: int
    children: list[tuple[int, ...]]
    root: int
    sizes: np.ndarray = field(init=False, repr=False)
    parents: np.ndarray = field(init=False, repr=False)
    _topo: list[int] = field(init=False, repr=False)

    def __post_init__(self):
        self._validate()

    # -- structure ---------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return self.n_leaves + len(self.children)

    @property
    def arity(self) -> str:
        return BINARY if all(len(c) == 2 for c in self.children) else NARY

    def is_leaf(self, node: int) -> bool:
        return node < self.n_leaves

    def children_of(self, node: int) -> tuple[int, ...]:
        return () if node < self.n_leaves else self.children[node - self.n_leaves]

    def internal_topo(self) -> list[int]:
        """Internal node ids ordered children-before-parents."""
        return list(self._topo)

    def leaves_under(self, node: int) -> list[int]:
        out, stack = [], [node]
        while stack:
            v = stack.pop()
            if v < self.n_leaves:
                out.append(v)
            else:
                stack.extend(self.children_of(v))
        return out

    def _validate(self):
        n = self.n_leaves
        if n < 1:
            raise InvalidParamError("a dendrogram needs at least one leaf")
        self.children = [tuple(int(c) for c in ch) for ch in self.children]
        m = self.n_nodes
        if not 0 <= self.root < m:
            raise InvalidParamError(f"root id {self.root} out of range")
        if n == 1 and not self.children:
            if self.root != 0:
                raise InvalidParamError("single-leaf tree must be rooted at leaf 0")
            self.sizes = np.ones(1, dtype=np.int64)
            self.parents = np.array([-1], dtype=np.int64)
            self._topo = []
            return
        parents = np.full(m, -2, dtype=np.int64)
        for j, ch in enumerate(self.children):
            if len(ch) < 2:
                raise InvalidParamError(f"internal node {n + j} has {len(ch)} children")
            for c in ch:
                if not 0 <= c < m:
                    raise InvalidParamError(f"child id {c} out of range")
                if parents[c] != -2:
                    raise InvalidParamError(f"node {c} has two parents")
                parents[c] = n + j
        if parents[self.root] != -2:
            raise InvalidParamError("root must not have a parent")
        parents[self.root] = -1
        orphans = np.flatnonzero(parents == -2)
        if orphans.size:
            raise InvalidParamError(f"nodes without a parent besides root: {orphans.tolist()}")
        # Iterative post-order from the root; detects unreachable nodes/cycles.
        topo: list[int] = []
        seen_leaves = 0
        stack: list[tuple[int, bool]] = [(self.root, False)]
        visited = np.zeros(m, dtype=bool)
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if visited[node]:
                raise InvalidParamError("cycle detected")
            visited[node] = True
            if node < n:
                seen_leaves += 1
                continue
            stack.append((node, True))
            for c in self.children_of(node):
                stack.append((c, False))
        if seen_leaves != n or not visited.all():
            raise InvalidParamError("leaves reachable from root must be exactly 0..n-1")
        sizes = np.zeros(m, dtype=np.int64)
        sizes[:n] = 1
        for node in topo:
            sizes[node] = sum(sizes[c] for c in self.children_of(node))
        if sizes[self.root] != n:
            raise InvalidParamError("root size must equal the number of leaves")
        self.sizes = sizes
        self.parents = parents
        self._topo = topo

    def __eq__(self, other) -> bool:
        """Structural equality; children are unordered (the serialized parent
        array does not encode sibling order)."""
        if not isinstance(other, Dendrogram):
            return NotImplemented
        return (self.n_leaves == other.n_leaves and self.root == other.root
                and [tuple(sorted(c)) for c in self.children]
                == [tuple(sorted(c)) for c in other.children])


class TreeAssembler:
    """Incrementally builds a Dendrogram by joining node ids bottom-up."""

    def __init__(self, n_leaves: int):
        self.n_leaves = n_leaves
        self.children: list[tuple[int, ...]] = []

    def join(self, *ids: int) -> int:
        node = self.n_leaves + len(self.children)
        self.children.append(tuple(ids))
        return node

    def build(self, root: int) -> Dendrogram:
        return Dendrogram(n_leaves=self.n_leaves, children=self.children, root=root)


def leaf_tree() -> Dendrogram:
    return Dendrogram(n_leaves=1, children=[], root=0)


def star_tree(n: int) -> Dendrogram:
    """One root with all n leaves as children (n-ary for n > 2)."""
    if n < 1:
        raise InvalidParamError("n must be >= 1")
    if n == 1:
        return leaf_tree()
    return Dendrogram(n_leaves=n, children=[tuple(range(n))], root=n)


def random_binary_tree(n: int, seed: int) -> Dendrogram:
    """Uniform recursive construction of a random binary tree.

    Leaves are shuffled, then every block is split by assigning each leaf to
    a side with probability 1/2, resampling empty splits.  Under this law
    each pair of any triple is equally likely to be the first separated,
    which is the symmetry the normalized objectives rely on.
    """
    if n < 1:
        raise InvalidParamError("n must be >= 1")
    if n == 1:
        return leaf_tree()
    rng = np.random.default_rng(seed)
    children: list[list[int]] = []
    pending: list[tuple[np.ndarray, int, int]] = [(rng.permutation(n), -1, -1)]
    root = -1
    while pending:
        block, parent, slot = pending.pop()
        if block.size == 1:
            node = int(block[0])
        else:
            children.append([-1, -1])
            node = n + len(children) - 1
            while True:
                mask = rng.integers(0, 2, size=block.size).astype(bool)
                if mask.any() and not mask.all():
                    break
            pending.append((block[mask], node, 0))
            pending.append((block[~mask], node, 1))
        if parent < 0:
            root = node
        else:
            children[parent - n][slot] = node
    return Dendrogram(n_leaves=n, children=[tuple(c) for c in children], root=root)


def path_tree(order) -> Dendrogram:
    """Caterpillar tree: the element at (1-indexed) position p splits off at
    depth p, so a pair at positions p < q has |LCA| = n - p + 1."""
    order = np.asarray(order, dtype=np.int64)
    n = order.size
    if n < 1 or not np.array_equal(np.sort(order), np.arange(n)):
        raise InvalidParamError("order must be a permutation of 0..n-1")
    if n == 1:
        return leaf_tree()
    asm = TreeAssembler(n)
    node = int(order[-1])
    for p in range(n - 2, -1, -1):
        node = asm.join(int(order[p]), node)
    return asm.build(node)


def lca_sizes_accumulate(tree: Dendrogram, *, leaf_state, merge_state,
                         cross_pair_sum, node_term) -> float:
    """Single bottom-up pass visiting every internal node exactly once.

    Per-subtree states start at ``leaf_state(leaf_id)`` and combine with
    ``merge_state``.  At each internal node C with children (L, R) the
    aggregate over L x R cross pairs is ``cross_pair_sum(state_L, state_R)``
    and ``node_term(|C|, aggregate)`` contributes to the compensated total.
    """
    if tree.arity != BINARY:
        raise NonBinaryTreeError("accumulation over cross pairs needs a binary tree")
    if tree.n_leaves == 1:
        return 0.0
    states: dict[int, object] = {}
    terms = []
    for node in tree._topo:
        left, right = tree.children_of(node)
        s_l = states.pop(left) if left >= tree.n_leaves else leaf_state(left)
        s_r = states.pop(right) if right >= tree.n_leaves else leaf_state(right)
        terms.append(node_term(int(tree.sizes[node]), cross_pair_sum(s_l, s_r)))
        states[node] = merge_state(s_l, s_r)
    return math.fsum(terms)


def serialize(tree: Dendrogram) -> bytes:
    """JSON encoding: {"n", "leaf_count", "parents", "root"} (see deserialize)."""
    payload = {
        "n": tree.n_leaves,
        "leaf_count": tree.n_leaves,
        "parents": [int(p) for p in tree.parents],
    }
    return (json.dumps(payload, separators=(",", ":")) + "\n").encode("utf-8")


def deserialize(data: bytes | str) -> Dendrogram:
    """Parse the parent-array JSON format back into a Dendrogram.

    ``parents`` has one entry per node (-1 for the root); ids 0..n-1 are
    leaves, the rest internal.  A binary tree has exactly 2n-1 entries.
    """
    try:
        payload = json.loads(data)
        n = int(payload["n"])
        parents = [int(p) for p in payload["parents"]]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed tree file: {exc}") from exc
    if "leaf_count" in payload and int(payload["leaf_count"]) != n:
        raise FormatError("leaf_count disagrees with n")
    m = len(parents)
    if n < 1 or m < n:
        raise FormatError("parent array shorter than the declared leaf count")
    roots = [i for i, p in enumerate(parents) if p == -1]
    if len(roots) != 1:
        raise FormatError(f"expected exactly one root, found {len(roots)}")
    children: list[list[int]] = [[] for _ in range(m - n)]
    for node, parent in enumerate(parents):
        if parent == -1:
            continue
        if not 0 <= parent < m:
            raise FormatError(f"parent id {parent} out of range")
        if parent < n:
            raise FormatError(f"leaf {parent} referenced as a parent")
        children[parent - n].append(node)
    try:
        return Dendrogram(n_leaves=n, children=[tuple(c) for c in children], root=roots[0])
    except InvalidParamError as exc:
        raise FormatError(str(exc)) from exc
