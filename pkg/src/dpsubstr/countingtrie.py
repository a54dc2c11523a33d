"""Candidate trie, noisy heavy-path counts, pruning and queries.

Pipeline (three equal budget shares by default):

1. private candidate set by length doubling (``candidates``);
2. trie over the candidates with exact counts, split into heavy paths;
3. noisy counts for the path roots;
4. noisy prefix sums of each path's difference sequence (binary tree mechanism);
5. node estimate = root estimate + prefix sum, prune nodes below ``2 * alpha_total``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .binarytree import (binary_tree_prefix_sums, binary_tree_prefix_sums_gaussian,
                         gaussian_prefix_bound, laplace_prefix_bound, padded_length)
from .candidates import CandidateSet, build_candidates
from .corpus import Database, InvalidInputError, SuffixIndex, build_index, check_symbols
from .heavypath import HeavyPathDecomposition, ceil_log2, heavy_path_decompose
from .mechanisms import (InvalidParameterError, NoiseSource, PrivacyBudget,
                         gaussian_max_error, gaussian_mechanism, laplace_max_error,
                         laplace_mechanism)


class InternalError(RuntimeError):
    pass


@dataclass
class CandidateTrie:
    """Trie over a candidate set, nodes numbered so that ``parent[v] < v``.

    ``count`` holds exact capped counts; it exists only during construction.
    """

    parent: list
    symbol: list
    depth: list
    count: np.ndarray
    strings: list
    children: list = field(repr=False)

    def __len__(self):
        return len(self.parent)


def build_trie(candidates, idx: SuffixIndex, cap: int | None = None) -> CandidateTrie:
    """Trie of every string in ``candidates`` with exact counts from the index.

    ``candidates`` is a :class:`CandidateSet` or any iterable of byte strings.
    """
    cap = idx.db.ell if cap is None else cap
    strings_in = candidates.strings() if isinstance(candidates, CandidateSet) else candidates
    parent, symbol, depth, strings = [-1], [0], [0], [b""]
    children: list[dict] = [{}]
    for s in sorted(set(map(bytes, strings_in))):
        v = 0
        for d, c in enumerate(s):
            nxt = children[v].get(c)
            if nxt is None:
                nxt = len(parent)
                children[v][c] = nxt
                children.append({})
                parent.append(v)
                symbol.append(c)
                depth.append(d + 1)
                strings.append(s[:d + 1])
            v = nxt
    counts = np.zeros(len(parent))
    counts[0] = idx.count(b"", cap)
    by_len: dict[int, list[int]] = {}
    for v in range(1, len(parent)):
        by_len.setdefault(depth[v], []).append(v)
    for m, nodes in by_len.items():
        table = idx.substrings_of_length(m, cap)
        for v in nodes:
            counts[v] = table.get(strings[v], 0)
    return CandidateTrie(parent, symbol, depth, counts, strings, children)


def difference_sequences(counts, hpd: HeavyPathDecomposition) -> list[np.ndarray]:
    """``diff_p[i] = count(v_i) - count(v_{i-1})`` for ``i >= 1`` on every path."""
    counts = np.asarray(counts, dtype=float)
    return [np.diff(counts[p]) for p in hpd.paths]


def root_sensitivity(ell: int, n_nodes: int) -> float:
    """L1 change of the path-root count vector under one document replacement."""
    return 2.0 * ell * (ceil_log2(n_nodes) + 1)


def noisy_root_counts(trie: CandidateTrie, hpd: HeavyPathDecomposition, budget: PrivacyBudget,
                      rng: NoiseSource, mode: str, ell: int, cap: int):
    """Noisy counts of the heavy-path roots plus the max-error bound at ``budget.beta``."""
    roots = hpd.roots
    exact = trie.count[roots]
    k = len(roots)
    lg = ceil_log2(len(trie))
    if mode == "pure":
        l1 = root_sensitivity(ell, len(trie))
        budget.spend(budget.epsilon, 0.0, "roots")
        noisy = laplace_mechanism(exact, l1, budget.epsilon, rng)
        bound = laplace_max_error(k, l1 / budget.epsilon, budget.beta)
        info = {"root_l1": l1, "root_scale": l1 / budget.epsilon}
    else:
        l2 = math.sqrt(2.0 * ell * cap * (lg + 1))
        budget.spend(budget.epsilon, budget.delta, "roots")
        noisy = gaussian_mechanism(exact, l2, budget.epsilon, budget.delta, rng)
        bound = gaussian_max_error(k, l2, budget.epsilon, budget.delta, budget.beta)
        info = {"root_l2": l2}
    return noisy, bound, info


def noisy_path_prefix_sums(seqs, budget: PrivacyBudget, rng: NoiseSource, mode: str,
                           ell: int, cap: int, n_nodes: int):
    L = root_sensitivity(ell, n_nodes)
    T = padded_length(seqs)
    k = sum(1 for s in seqs if len(s))
    if mode == "pure":
        budget.spend(budget.epsilon, 0.0, "prefix-sums")
        sums = binary_tree_prefix_sums(seqs, L, budget.epsilon, rng, T=T)
        bound = laplace_prefix_bound(k, T, L, budget.epsilon, budget.beta)
        info = {"prefix_L": L, "T": T}
    else:
        budget.spend(budget.epsilon, budget.delta, "prefix-sums")
        sums = binary_tree_prefix_sums_gaussian(seqs, L, 2.0 * cap, budget.epsilon,
                                                budget.delta, rng, T=T)
        bound = gaussian_prefix_bound(k, T, L, 2.0 * cap, budget.epsilon, budget.delta,
                                      budget.beta)
        info = {"prefix_L": L, "prefix_cap": 2 * cap, "T": T}
    return sums, bound, info


class PrivateCountTrie:
    """Pruned trie with one noisy count per node; immutable once built.

    Arrays are in topological order (``parent[v] < v``, root is node 0 with
    parent ``-1``). Queries walk the trie, so they take ``O(|P|)`` steps.
    """

    def __init__(self, parent, symbol, count, meta: dict):
        self.parent = np.asarray(parent, dtype=np.int32)
        self.symbol = np.asarray(symbol, dtype=np.uint16)
        self.count = np.asarray(count, dtype=np.float64)
        self.meta = dict(meta)
        if not (len(self.parent) == len(self.symbol) == len(self.count)) or len(self.parent) == 0:
            raise InternalError("inconsistent node table")
        self._children: list[dict] = [dict() for _ in range(len(self.parent))]
        for v, (p, c) in enumerate(zip(self.parent.tolist(), self.symbol.tolist())):
            if v == 0:
                continue
            if not 0 <= p < v:
                raise InternalError(f"node {v} has parent {p}")
            self._children[p][c] = v
        self._strings = None

    def __len__(self):
        return len(self.parent)

    @property
    def failed(self) -> bool:
        return bool(self.meta.get("failed", False))

    def node_of(self, pattern) -> int | None:
        p = check_symbols(pattern, self.meta.get("sigma", 256))
        v = 0
        for c in p:
            v = self._children[v].get(c)
            if v is None:
                return None
        return v

    def query(self, pattern) -> float:
        """Noisy count of ``pattern`` or 0 when it was pruned or never a candidate."""
        p = check_symbols(pattern, self.meta.get("sigma", 256))
        if len(p) > self.meta.get("ell", len(p)):
            return 0.0
        v = self.node_of(p)
        return 0.0 if v is None else float(self.count[v])

    def strings(self) -> list[bytes]:
        if self._strings is None:
            out = [b""]
            for v in range(1, len(self.parent)):
                out.append(out[self.parent[v]] + bytes([int(self.symbol[v])]))
            self._strings = out
        return self._strings

    def items(self):
        """``(pattern, noisy count)`` for every retained non-root node."""
        s = self.strings()
        return [(s[v], float(self.count[v])) for v in range(1, len(self.parent))]

    def mine(self, tau: float) -> list[tuple[bytes, float]]:
        """Retained patterns with noisy count at least ``tau``, by count desc then lexicographic."""
        if tau < 0:
            raise InvalidParameterError("tau must be >= 0")
        hits = [(p, c) for p, c in self.items() if c >= tau]
        hits.sort(key=lambda pc: (-pc[1], pc[0]))
        return hits

    def __eq__(self, other):
        if not isinstance(other, PrivateCountTrie):
            return NotImplemented
        return (type(self) is type(other)
                and np.array_equal(self.parent, other.parent)
                and np.array_equal(self.symbol, other.symbol)
                and np.array_equal(self.count, other.count, equal_nan=True)
                and json.dumps(self.meta, sort_keys=True) == json.dumps(other.meta, sort_keys=True))


def assemble(trie: CandidateTrie, hpd: HeavyPathDecomposition, root_counts, prefix_sums,
             threshold: float, meta: dict | None = None) -> PrivateCountTrie:
    """Node estimate = path-root estimate + prefix sum at the node's offset, then prune.

    A node survives when its estimate is at least ``threshold`` and its parent
    survived; the root always survives.
    """
    n = len(trie)
    if len(hpd.path_of) != n or len(root_counts) != len(hpd.paths) \
            or len(prefix_sums) != len(hpd.paths):
        raise InternalError("decomposition does not match trie")
    est = np.empty(n)
    for pid, path in enumerate(hpd.paths):
        if len(prefix_sums[pid]) != len(path) - 1:
            raise InternalError(f"prefix sums of path {pid} have wrong length")
        est[path[0]] = root_counts[pid]
        if len(path) > 1:
            est[path[1:]] = root_counts[pid] + np.asarray(prefix_sums[pid])
    new_id = np.full(n, -1, dtype=np.int64)
    new_id[0] = 0
    parent, symbol, count = [-1], [0], [est[0]]
    for v in range(1, n):
        p = trie.parent[v]
        if new_id[p] < 0 or est[v] < threshold:
            continue
        new_id[v] = len(parent)
        parent.append(int(new_id[p]))
        symbol.append(trie.symbol[v])
        count.append(est[v])
    return PrivateCountTrie(parent, symbol, count, meta or {})


def _failed_structure(db: Database, meta: dict) -> PrivateCountTrie:
    return PrivateCountTrie([-1], [0], [0.0], meta)


def build_private_trie(db: Database, epsilon: float, delta: float = 0.0, beta: float = 0.05,
                       cap: int | None = None, seed: int = 0, zero_noise: bool = False,
                       shares=(1 / 3, 1 / 3, 1 / 3), tau_candidates: float | None = None,
                       prune_threshold: float | None = None,
                       index: SuffixIndex | None = None) -> PrivateCountTrie:
    """Full private build. ``delta == 0`` selects pure mode, otherwise approximate mode.

    ``tau_candidates`` and ``prune_threshold`` override the data-independent
    thresholds; they are meant for oracle tests and are recorded in the metadata.
    A size abort in the candidate stage is returned as a structure with
    ``meta["failed"] = True`` rather than raised.
    """
    mode = "pure" if delta == 0 else "approx"
    ell = db.ell
    cap = ell if cap is None else int(cap)
    budget = PrivacyBudget(epsilon, delta, beta, cap)
    b_cand, b_root, b_pref = budget.split(shares, ["candidates", "roots", "prefix-sums"])
    idx = build_index(db) if index is None else index
    rng = NoiseSource(seed, zero_noise=zero_noise)
    meta = {
        "kind": "substring", "format_version": 1, "package_version": __version__,
        "mode": mode, "n": db.n, "ell": ell, "sigma": db.sigma, "cap": cap,
        "epsilon": epsilon, "delta": delta, "beta": beta, "seed": int(seed),
        "zero_noise": bool(zero_noise), "shares": list(shares),
        "symbols": list(db.alphabet.symbols) if db.alphabet.symbols else None,
    }
    cands = build_candidates(db, idx, b_cand, rng.child("candidates"), mode, cap=cap,
                             tau=tau_candidates)
    meta.update(alpha_candidates=cands.alpha, tau_candidates=cands.tau,
                failed=cands.failed, fail_level=cands.fail_level,
                candidate_sizes=[len(s) for s in cands.pow_sets])
    if cands.failed:
        meta.update(alpha_total=float("nan"), prune_threshold=float("nan"),
                    budget=budget.summary())
        return _failed_structure(db, meta)

    trie = build_trie(cands, idx, cap)
    hpd = heavy_path_decompose(trie.parent, trie.symbol)
    roots, root_bound, rinfo = noisy_root_counts(trie, hpd, b_root, rng.child("roots"),
                                                 mode, ell, cap)
    seqs = difference_sequences(trie.count, hpd)
    sums, pref_bound, pinfo = noisy_path_prefix_sums(seqs, b_pref, rng.child("prefix"),
                                                     mode, ell, cap, len(trie))
    alpha_total = root_bound + pref_bound
    threshold = 2.0 * alpha_total if prune_threshold is None else float(prune_threshold)
    meta.update(rinfo)
    meta.update(pinfo)
    meta.update(
        alpha_total=alpha_total, root_bound=root_bound, prefix_bound=pref_bound,
        prune_threshold=threshold, trie_nodes=len(trie), heavy_paths=len(hpd.paths),
        absent_floor=max(threshold + alpha_total, cands.tau + cands.alpha),
        budget=budget.summary(),
    )
    return assemble(trie, hpd, roots, sums, threshold, meta)
