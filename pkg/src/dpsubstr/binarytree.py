"""Binary tree (dyadic interval) mechanism for many prefix-sum sequences.

Each sequence is padded to length ``T`` (a power of two). Level ``i`` holds the
sums of the aligned blocks of length ``2**i``; every prefix ``[1, m]`` is the
disjoint union of one block per set bit of ``m``, so it touches at most
``log2(T) + 1`` noisy values.
"""

from __future__ import annotations

import math

import numpy as np

from .mechanisms import (InvalidParameterError, NoiseSource, gaussian_sample,
                         gaussian_tail, laplace_sample, sum_laplace_tail)


def padded_length(seqs) -> int:
    longest = max((len(s) for s in seqs), default=0)
    return 1 << max(0, (longest - 1).bit_length()) if longest else 1


def dyadic_decomposition(m: int) -> list[tuple[int, int]]:
    """1-indexed inclusive dyadic intervals whose union is ``[1, m]``, largest first."""
    if m < 0:
        raise ValueError("m must be >= 0")
    out = []
    start = 1
    for i in range(m.bit_length() - 1, -1, -1):
        if m >> i & 1:
            out.append((start, start + (1 << i) - 1))
            start += 1 << i
    return out


def _stack(seqs, T: int) -> np.ndarray:
    mat = np.zeros((len(seqs), T), dtype=float)
    for r, s in enumerate(seqs):
        mat[r, :len(s)] = s
    return mat


def _prefix_from_blocks(blocks: list[np.ndarray], T: int) -> np.ndarray:
    ms = np.arange(1, T + 1)
    k = blocks[0].shape[0]
    out = np.zeros((k, T))
    for i, b in enumerate(blocks):
        bit = (ms >> i) & 1
        j = np.maximum((ms >> i) - 1, 0)
        out += b[:, j] * bit
    return out


def _noisy_prefix_sums(seqs, T, draw):
    mat = _stack(seqs, T)
    n_levels = T.bit_length()
    blocks = []
    for i in range(n_levels):
        exact = mat.reshape(len(seqs), T >> i, 1 << i).sum(axis=2)
        blocks.append(exact + draw(i, exact.shape))
    pref = _prefix_from_blocks(blocks, T)
    return [pref[r, :len(s)] for r, s in enumerate(seqs)]


def laplace_prefix_scale(L: float, eps: float, T: int) -> float:
    return L * T.bit_length() / eps


def binary_tree_prefix_sums(seqs, L: float, eps: float, rng: NoiseSource,
                            T: int | None = None) -> list[np.ndarray]:
    """Noisy prefix sums of every sequence; ``L`` bounds the total L1 change of all sequences."""
    if not L > 0 or not eps > 0:
        raise InvalidParameterError("L and eps must be positive")
    if not seqs:
        return []
    T = padded_length(seqs) if T is None else T
    scale = laplace_prefix_scale(L, eps, T)
    return _noisy_prefix_sums(
        seqs, T, lambda i, shape: laplace_sample(scale, rng.child("level", i), size=shape))


def laplace_prefix_bound(k: int, T: int, L: float, eps: float, beta: float) -> float:
    """Max prefix error over ``k`` sequences, exceeded with probability at most ``beta``."""
    if k == 0:
        return 0.0
    scale = laplace_prefix_scale(L, eps, T)
    return sum_laplace_tail(T.bit_length(), scale, beta / (k * T))


def gaussian_prefix_sigma(L: float, cap: float, eps: float, delta: float, T: int) -> float:
    """Per-block noise ``eps^-1 sqrt(2 L cap (log T + 1) ln(2/delta))``."""
    if not 0 < eps < 1:
        raise InvalidParameterError(
            f"Gaussian prefix sums need 0 < eps < 1 (got {eps}); split the budget further")
    if not 0 < delta < 1:
        raise InvalidParameterError(f"delta must be in (0, 1), got {delta}")
    return math.sqrt(2.0 * L * cap * T.bit_length() * math.log(2.0 / delta)) / eps


def binary_tree_prefix_sums_gaussian(seqs, L: float, cap: float, eps: float, delta: float,
                                     rng: NoiseSource, T: int | None = None) -> list[np.ndarray]:
    """Gaussian variant; ``cap`` bounds the L1 change of any single sequence."""
    if not L > 0 or not cap > 0:
        raise InvalidParameterError("L and cap must be positive")
    if not seqs:
        return []
    T = padded_length(seqs) if T is None else T
    sigma = gaussian_prefix_sigma(L, cap, eps, delta, T)
    return _noisy_prefix_sums(
        seqs, T, lambda i, shape: gaussian_sample(sigma, rng.child("level", i), size=shape))


def gaussian_prefix_bound(k: int, T: int, L: float, cap: float, eps: float, delta: float,
                          beta: float) -> float:
    """Union bound over ``k * T`` prefixes of ``N(0, (log T + 1) sigma^2)`` noise."""
    if k == 0:
        return 0.0
    sigma1 = gaussian_prefix_sigma(L, cap, eps, delta, T) * math.sqrt(T.bit_length())
    return gaussian_tail(sigma1, beta, k * T)
