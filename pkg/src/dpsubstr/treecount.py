"""Private estimates of monotone counting functions on arbitrary rooted trees.

The caller supplies exact node counts ``c(v)`` (for example the distinct-color
counts from :func:`colored_counts`) and the leaf sensitivity ``d``: the most
the leaf-count vector can move in L1 between neighbouring datasets.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .binarytree import (binary_tree_prefix_sums, binary_tree_prefix_sums_gaussian,
                         gaussian_prefix_bound, laplace_prefix_bound, padded_length)
from .corpus import InvalidInputError
from .heavypath import ceil_log2, heavy_path_decompose
from .mechanisms import (InvalidParameterError, NoiseSource, PrivacyBudget,
                         gaussian_max_error, gaussian_mechanism, laplace_max_error,
                         laplace_mechanism)


class RootedTree:
    """Tree on nodes ``0 .. V-1`` given by a parent array (root has parent ``-1``)."""

    def __init__(self, parent, labels=None):
        parent = [int(p) for p in parent]
        V = len(parent)
        if V == 0:
            raise InvalidInputError("tree must have at least one node")
        roots = [v for v, p in enumerate(parent) if p == -1]
        if len(roots) != 1:
            raise InvalidInputError(f"expected exactly one root, found {len(roots)}")
        children = [[] for _ in range(V)]
        for v, p in enumerate(parent):
            if p == -1:
                continue
            if not 0 <= p < V or p == v:
                raise InvalidInputError(f"node {v} has invalid parent {p}")
            children[p].append(v)
        order = []
        depth = [0] * V
        queue = deque([roots[0]])
        while queue:
            v = queue.popleft()
            order.append(v)
            for u in children[v]:
                depth[u] = depth[v] + 1
                queue.append(u)
        if len(order) != V:
            raise InvalidInputError("parent array contains a cycle or disconnected nodes")
        self.parent = parent
        self.children = children
        self.root = roots[0]
        self.order = order
        self.depth = depth
        self.labels = list(labels) if labels is not None else list(range(V))

    def __len__(self):
        return len(self.parent)

    @property
    def leaves(self) -> list[int]:
        return [v for v in range(len(self)) if not self.children[v]]

    @property
    def height(self) -> int:
        return max(self.depth)

    def ancestors(self, v: int):
        while v != -1:
            yield v
            v = self.parent[v]


def read_tree(path) -> RootedTree:
    """Parse ``node_id parent_id`` lines; the root's parent is ``-1``. ``#`` starts a comment."""
    pairs = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidInputError(f"{path}:{ln}: expected 'node_id parent_id'")
        pairs.append((parts[0], parts[1]))
    ids = [a for a, _ in pairs]
    if len(set(ids)) != len(ids):
        raise InvalidInputError(f"{path}: duplicate node ids")
    pos = {a: i for i, a in enumerate(ids)}
    parent = []
    for a, b in pairs:
        if b == "-1":
            parent.append(-1)
        elif b in pos:
            parent.append(pos[b])
        else:
            raise InvalidInputError(f"{path}: unknown parent {b!r} of node {a!r}")
    return RootedTree(parent, labels=ids)


def read_items(path, tree: RootedTree) -> list[tuple[int, str]]:
    """Parse ``leaf_id color`` lines, one item per line."""
    pos = {lab: i for i, lab in enumerate(tree.labels)}
    items = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidInputError(f"{path}:{ln}: expected 'leaf_id color'")
        if parts[0] not in pos:
            raise InvalidInputError(f"{path}:{ln}: unknown node {parts[0]!r}")
        items.append((pos[parts[0]], parts[1]))
    return items


def colored_counts(tree: RootedTree, items) -> np.ndarray:
    """Distinct colors among the items at leaves below each node."""
    colors = [None] * len(tree)
    for leaf, color in items:
        if not 0 <= leaf < len(tree) or tree.children[leaf]:
            raise InvalidInputError(f"item assigned to {leaf}, which is not a leaf")
        if colors[leaf] is None:
            colors[leaf] = set()
        colors[leaf].add(color)
    out = np.zeros(len(tree), dtype=np.int64)
    for v in reversed(tree.order):
        acc = colors[v] or set()
        for u in tree.children[v]:
            cu = colors[u]
            if cu is None:
                continue
            if len(cu) > len(acc):
                acc, cu = cu, acc
            acc |= cu
            colors[u] = None
        colors[v] = acc
        out[v] = len(acc)
    return out


def check_monotone(tree: RootedTree, counts) -> None:
    """Raise unless ``c(v) <= sum of c(children)`` at every internal node."""
    counts = np.asarray(counts)
    for v in range(len(tree)):
        ch = tree.children[v]
        if ch and counts[v] > counts[ch].sum():
            raise InvalidInputError(
                f"count at node {tree.labels[v]} exceeds the sum over its children")


@dataclass
class TreeCountResult:
    estimates: np.ndarray
    bound: float
    meta: dict = field(default_factory=dict)

    def __getitem__(self, v):
        return self.estimates[v]


def _tree_counts(tree: RootedTree, counts, d: float, epsilon: float, delta: float,
                 beta: float, cap: float | None, seed: int, zero_noise: bool,
                 validate: bool) -> TreeCountResult:
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (len(tree),):
        raise InvalidInputError(f"need one count per node ({len(tree)}), got {counts.shape}")
    if not d > 0:
        raise InvalidParameterError("leaf sensitivity d must be positive")
    if validate:
        check_monotone(tree, counts)
    mode = "pure" if delta == 0 else "approx"
    if mode == "approx" and (cap is None or not cap > 0):
        raise InvalidParameterError("approx mode needs the per-node bound cap > 0")
    budget = PrivacyBudget(epsilon, delta, beta)
    b_root, b_pref = budget.split([0.5, 0.5], ["roots", "prefix-sums"])
    rng = NoiseSource(seed, zero_noise=zero_noise)

    # relabel in BFS order so parents precede children
    new_of = {v: i for i, v in enumerate(tree.order)}
    parent = [-1] + [new_of[tree.parent[v]] for v in tree.order[1:]]
    hpd = heavy_path_decompose(parent, symbol=tree.order)
    c = counts[tree.order]
    V = len(tree)
    lg = ceil_log2(V)
    roots = [p[0] for p in hpd.paths]
    seqs = [np.diff(c[p]) for p in hpd.paths]
    T = padded_length(seqs)
    k_seq = sum(1 for s in seqs if len(s))
    root_l1 = d * (lg + 1)
    L = 2.0 * d * (lg + 1)
    if mode == "pure":
        b_root.spend(b_root.epsilon, 0.0, "roots")
        b_pref.spend(b_pref.epsilon, 0.0, "prefix-sums")
        root_est = laplace_mechanism(c[roots], root_l1, b_root.epsilon, rng.child("roots"))
        sums = binary_tree_prefix_sums(seqs, L, b_pref.epsilon, rng.child("prefix"), T=T)
        rb = laplace_max_error(len(roots), root_l1 / b_root.epsilon, b_root.beta)
        pb = laplace_prefix_bound(k_seq, T, L, b_pref.epsilon, b_pref.beta)
        info = {"root_l1": root_l1}
    else:
        b_root.spend(b_root.epsilon, b_root.delta, "roots")
        b_pref.spend(b_pref.epsilon, b_pref.delta, "prefix-sums")
        root_l2 = math.sqrt(root_l1 * cap)
        root_est = gaussian_mechanism(c[roots], root_l2, b_root.epsilon, b_root.delta,
                                      rng.child("roots"))
        sums = binary_tree_prefix_sums_gaussian(seqs, L, 2.0 * cap, b_pref.epsilon,
                                                b_pref.delta, rng.child("prefix"), T=T)
        rb = gaussian_max_error(len(roots), root_l2, b_root.epsilon, b_root.delta, b_root.beta)
        pb = gaussian_prefix_bound(k_seq, T, L, 2.0 * cap, b_pref.epsilon, b_pref.delta,
                                   b_pref.beta)
        info = {"root_l2": root_l2, "prefix_cap": 2.0 * cap}
    est_new = np.empty(V)
    for pid, path in enumerate(hpd.paths):
        est_new[path[0]] = root_est[pid]
        if len(path) > 1:
            est_new[path[1:]] = root_est[pid] + sums[pid]
    est = np.empty(V)
    est[tree.order] = est_new
    meta = {"mode": mode, "epsilon": epsilon, "delta": delta, "beta": beta, "d": d,
            "cap": cap, "seed": int(seed), "zero_noise": bool(zero_noise), "nodes": V,
            "height": tree.height, "heavy_paths": len(hpd.paths), "T": T,
            "prefix_L": L, "root_bound": rb, "prefix_bound": pb, "budget": budget.summary()}
    meta.update(info)
    return TreeCountResult(est, rb + pb, meta)


def dp_tree_counts_pure(tree: RootedTree, counts, d: float, epsilon: float, beta: float = 0.05,
                        seed: int = 0, zero_noise: bool = False,
                        validate: bool = False) -> TreeCountResult:
    """epsilon-DP estimates; half the budget for heavy-path roots, half for prefix sums."""
    return _tree_counts(tree, counts, d, epsilon, 0.0, beta, None, seed, zero_noise, validate)


def dp_tree_counts_approx(tree: RootedTree, counts, d: float, cap: float, epsilon: float,
                          delta: float, beta: float = 0.05, seed: int = 0,
                          zero_noise: bool = False, validate: bool = False) -> TreeCountResult:
    """(epsilon, delta)-DP estimates when each node count moves by at most ``cap``."""
    if not delta > 0:
        raise InvalidParameterError("approx mode requires delta > 0")
    return _tree_counts(tree, counts, d, epsilon, delta, beta, cap, seed, zero_noise, validate)
