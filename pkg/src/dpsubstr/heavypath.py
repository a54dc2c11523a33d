"""Heavy path decomposition of a rooted tree given as a parent array."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HeavyPathDecomposition:
    """Paths ``v_0 .. v_{t-1}`` that follow heavy edges.

    ``path_of[v]`` and ``offset[v]`` locate every node; ``heavy[v]`` is the
    heavy child of ``v`` or ``-1`` for leaves. ``paths[0]`` starts at the root.
    """

    paths: list
    path_of: np.ndarray
    offset: np.ndarray
    heavy: np.ndarray
    subtree_size: np.ndarray

    @property
    def roots(self) -> list[int]:
        return [p[0] for p in self.paths]

    def __len__(self):
        return len(self.paths)


def heavy_path_decompose(parent, symbol=None) -> HeavyPathDecomposition:
    """Decompose a tree whose nodes are numbered so that ``parent[v] < v``.

    Node 0 is the root (its parent entry is ignored). The heavy child is the
    one with the largest subtree counted in nodes; ties go to the smallest
    ``symbol`` (or the smallest node id when no symbols are given).
    """
    parent = np.asarray(parent, dtype=np.int64)
    n = len(parent)
    if n == 0:
        raise ValueError("tree must have at least one node")
    if n > 1 and np.any(parent[1:] >= np.arange(1, n)):
        raise ValueError("nodes must be numbered so that parent[v] < v")
    sym = np.arange(n) if symbol is None else np.asarray(symbol, dtype=np.int64)
    par = parent.tolist()
    size = [1] * n
    for v in range(n - 1, 0, -1):
        size[par[v]] += size[v]
    heavy = [-1] * n
    best = [(0, 0)] * n
    sym_l = sym.tolist()
    for v in range(1, n):
        p = par[v]
        key = (size[v], -sym_l[v])
        if heavy[p] == -1 or key > best[p]:
            heavy[p] = v
            best[p] = key
    path_of = [0] * n
    offset = [0] * n
    paths: list[list[int]] = [[0]]
    for v in range(1, n):
        p = par[v]
        if heavy[p] == v:
            pid = path_of[p]
            path_of[v] = pid
            offset[v] = offset[p] + 1
            paths[pid].append(v)
        else:
            path_of[v] = len(paths)
            paths.append([v])
    return HeavyPathDecomposition(paths, np.asarray(path_of), np.asarray(offset),
                                  np.asarray(heavy), np.asarray(size))


def light_edge_depths(parent, hpd: HeavyPathDecomposition) -> np.ndarray:
    """Number of light edges on the path from the root to every node."""
    par = np.asarray(parent, dtype=np.int64).tolist()
    heavy = hpd.heavy.tolist()
    out = [0] * len(par)
    for v in range(1, len(par)):
        p = par[v]
        out[v] = out[p] + (heavy[p] != v)
    return np.asarray(out)


def ceil_log2(x: int) -> int:
    return max(0, (int(x) - 1).bit_length())
