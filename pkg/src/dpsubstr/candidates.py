"""Private candidate sets built by length doubling.

Level ``k`` keeps the strings of length ``2**k`` whose noisy count clears the
threshold ``tau``. Level ``k+1`` only looks at concatenations of two kept
strings, and every length ``m`` between powers of two is covered by gluing a
kept prefix and a kept suffix that overlap.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .corpus import Database, SuffixIndex
from .mechanisms import (InvalidParameterError, NoiseSource, PrivacyBudget,
                         gaussian_sample, gaussian_sigma, laplace_sample)


def num_levels(ell: int) -> int:
    """``floor(log2 ell) + 1`` power-of-two levels."""
    if ell < 1:
        raise InvalidParameterError(f"ell must be >= 1, got {ell}")
    return ell.bit_length()


def universe_size(n: int, ell: int, sigma: int) -> int:
    return max(ell * ell * n * n, sigma)


def pure_alpha(ell: int, n: int, sigma: int, eps1: float, beta1: float) -> float:
    """Per-level error bound of the Laplace doubling step."""
    return 2.0 * ell / eps1 * math.log(universe_size(n, ell, sigma) / beta1)


def approx_alpha(ell: int, n: int, sigma: int, cap: int, eps1: float, delta1: float,
                 beta1: float) -> float:
    """Per-level error bound of the Gaussian doubling step."""
    return (2.0 / eps1) * math.sqrt(
        2.0 * ell * cap * math.log(2.0 / delta1)
        * math.log(2.0 * universe_size(n, ell, sigma) / beta1))


@dataclass
class CandidateSet:
    """Kept power-of-two sets plus lazily assembled per-length candidates.

    ``pow_sets[k]`` maps each kept string of length ``2**k`` to a witness
    position in the index (or ``None`` if it does not occur). When
    ``failed`` is true the construction aborted at ``fail_level`` because a
    level grew past ``n * ell`` strings; the sets are then unusable.
    """

    pow_sets: list
    ell: int
    tau: float
    alpha: float
    mode: str = "pure"
    failed: bool = False
    fail_level: int | None = None
    index: SuffixIndex | None = field(default=None, repr=False)
    info: dict = field(default_factory=dict)
    _per_length: dict = field(default_factory=dict, repr=False)

    def per_length(self, m: int) -> dict:
        """``C_m`` as a map string -> witness (``None`` when absent from the data)."""
        if self.failed:
            raise RuntimeError(f"candidate construction aborted at level {self.fail_level}")
        if m < 1 or m > self.ell:
            return {}
        if m not in self._per_length:
            k = m.bit_length() - 1
            if k >= len(self.pow_sets):
                self._per_length[m] = {}
            elif m == 1 << k:
                self._per_length[m] = dict(self.pow_sets[k])
            else:
                self._per_length[m] = candidates_of_length(m, self.pow_sets[k], self.index)
        return self._per_length[m]

    def lengths(self):
        return range(1, self.ell + 1)

    def strings(self):
        """Iterate over every candidate string, shortest first."""
        for m in self.lengths():
            yield from self.per_length(m)

    def __len__(self):
        return sum(len(self.per_length(m)) for m in self.lengths())

    def __contains__(self, pattern) -> bool:
        p = bytes(pattern)
        return p in self.per_length(len(p))


def candidates_of_length(m: int, pow_set, idx: SuffixIndex | None = None) -> dict:
    """All length-``m`` strings whose ``2**k`` prefix and suffix are in ``pow_set``.

    With ``2**k < m < 2**(k+1)`` the prefix and suffix overlap in
    ``o = 2**(k+1) - m`` symbols, so a pair ``(q1, q2)`` glues into
    ``q1 + q2[o:]`` exactly when ``q1[-o:] == q2[:o]``. Pairs are matched by
    hashing on the overlap.
    """
    k = m.bit_length() - 1
    half = 1 << k
    if m == half:
        raise InvalidParameterError("m must lie strictly between two powers of two")
    if not pow_set:
        return {}
    o = 2 * half - m
    by_head = defaultdict(list)
    for q in pow_set:
        if len(q) != half:
            raise InvalidParameterError(f"pow_set entry {q!r} has length {len(q)} != {half}")
        by_head[q[:o]].append(q)
    occurring = idx.substrings_of_length(m, with_witness=True) if idx is not None else {}
    out = {}
    for q1 in sorted(pow_set):
        for q2 in by_head.get(q1[half - o:], ()):
            s = q1 + q2[o:]
            hit = occurring.get(s)
            out[s] = None if hit is None else hit[1]
    return out


def _level_counts(idx: SuffixIndex, level: int, prev: list, cap: int) -> np.ndarray:
    """Exact capped counts of every concatenation in ``prev x prev``, row-major."""
    size = len(prev)
    counts = np.zeros(size * size, dtype=float)
    if size == 0:
        return counts
    pos = {q: i for i, q in enumerate(prev)}
    half = 1 << (level - 1)
    for s, c in idx.substrings_of_length(1 << level, cap).items():
        a = pos.get(s[:half])
        if a is None:
            continue
        b = pos.get(s[half:])
        if b is not None:
            counts[a * size + b] = c
    return counts


def build_candidates(db: Database, idx: SuffixIndex, budget: PrivacyBudget,
                     rng: NoiseSource, mode: str = "pure", cap: int | None = None,
                     tau: float | None = None, levels: int | None = None) -> CandidateSet:
    """Doubling construction shared by both privacy modes.

    ``tau`` overrides the threshold ``2 * alpha`` (for oracle tests; the
    privacy guarantee does not depend on it). ``levels`` limits how many
    power-of-two levels are built (the q-gram pipelines stop early).
    """
    ell, n, sigma = db.ell, db.n, db.sigma
    cap = ell if cap is None else int(cap)
    if not 1 <= cap <= ell:
        raise InvalidParameterError(f"cap must be in [1, {ell}], got {cap}")
    n_levels = num_levels(ell) if levels is None else levels
    eps1 = budget.epsilon / n_levels
    beta1 = budget.beta / n_levels
    if mode == "pure":
        if budget.delta != 0:
            raise InvalidParameterError("pure mode requires delta = 0")
        alpha = pure_alpha(ell, n, sigma, eps1, beta1)
        scale = 2.0 * ell / eps1

        def noise(r, size):
            return laplace_sample(scale, r, size=size)
        info = {"eps_level": eps1, "beta_level": beta1, "laplace_scale": scale}
    elif mode == "approx":
        if not budget.delta > 0:
            raise InvalidParameterError("approx mode requires delta > 0")
        delta1 = budget.delta / n_levels
        alpha = approx_alpha(ell, n, sigma, cap, eps1, delta1, beta1)
        sigma_g = gaussian_sigma(math.sqrt(2.0 * ell * cap), eps1, delta1)

        def noise(r, size):
            return gaussian_sample(sigma_g, r, size=size)
        info = {"eps_level": eps1, "delta_level": delta1, "beta_level": beta1,
                "gaussian_sigma": sigma_g}
    else:
        raise InvalidParameterError(f"unknown mode {mode!r}")
    threshold = 2.0 * alpha if tau is None else float(tau)
    info.update(levels=n_levels, universe=universe_size(n, ell, sigma))

    result = CandidateSet([], ell, threshold, alpha, mode, index=idx, info=info)
    limit = n * ell
    for k in range(n_levels):
        budget.spend(eps1, budget.delta / n_levels, label=f"candidates/level{k}")
        r = rng.child("level", k)
        if k == 0:
            strings = [bytes([c]) for c in range(sigma)]
            exact = idx.substrings_of_length(1, cap)
            counts = np.array([exact.get(s, 0) for s in strings], dtype=float)
        else:
            prev = sorted(result.pow_sets[k - 1])
            counts = _level_counts(idx, k, prev, cap)
            strings = None
        noisy = counts + noise(r, counts.shape) if counts.size else counts
        keep = np.flatnonzero(noisy >= threshold)
        if strings is None:
            size = len(prev)
            strings = [prev[i // size] + prev[i % size] for i in keep]
        else:
            strings = [strings[i] for i in keep]
        witness = idx.substrings_of_length(1 << k, with_witness=True)
        level = {s: (witness[s][1] if s in witness else None) for s in strings}
        result.pow_sets.append(level)
        if len(level) > limit:
            result.failed = True
            result.fail_level = k
            break
    return result


def build_candidates_pure(db, idx, budget, rng, cap=None, tau=None) -> CandidateSet:
    return build_candidates(db, idx, budget, rng, "pure", cap=cap, tau=tau)


def build_candidates_approx(db, idx, budget, rng, cap=None, tau=None) -> CandidateSet:
    return build_candidates(db, idx, budget, rng, "approx", cap=cap, tau=tau)
